#pragma once

#include <vector>

#include "tomosim/projector.hpp"

// Reconstruction: filtered back projection (per-row ramp filter through a
// zero-padded FFT, pixel-driven back projection weighted pi / n_angles)
// and CGLS on the matched radon_forward / back_project pair. Missing-wedge
// data gets no special compensation; limited-view artefacts are the
// object of study.

namespace tomosim {

enum class SamplingKind { full, sampling1, sampling2, custom };

struct SamplingScheme {
  SamplingKind kind = SamplingKind::full;
  std::vector<int> indices;  // into the parent angle grid, ascending
};

// sampling1/sampling2 are contiguous / split index windows of the
// 50-angle parent grid (a central 30-angle window, and its 15+15 flank
// complement); custom requires explicit indices
SamplingScheme make_sampling(SamplingKind kind, const std::vector<double>& parent_angles,
                             std::vector<int> custom_indices = {});

// angular span missing from a scheme, in degrees
double missing_wedge_deg(const SamplingScheme& scheme, const std::vector<double>& parent_angles);

Sinogram select_angles(const Sinogram& sino, const SamplingScheme& scheme);

enum class FilterKind { ramp, none };

struct ReconSettings {
  FilterKind filter = FilterKind::ramp;
  double cutoff = 1.0;       // fraction of the detector Nyquist frequency
  int iterations = 15;       // CGLS
  int output_size = 256;     // reconstruction grid; pixel size = fov / size
};

Grid2D fbp(const Sinogram& sino, const ReconSettings& settings);

struct CglsResult {
  Grid2D image;
  std::vector<double> residual_norms;  // ||A x_k - b||, one entry per iteration
  bool breakdown = false;              // stalled before the iteration budget
};

// conjugate gradient on the normal equations from x0 = 0
CglsResult cgls(const Sinogram& sino, const ReconSettings& settings);

}

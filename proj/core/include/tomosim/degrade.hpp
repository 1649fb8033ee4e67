#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tomosim/projector.hpp"

// Measurement degradation: additive Gaussian noise on log data, and a
// two-Gaussian scatter kernel superposition applied in the intensity
// domain. Scatter kernels are parameterised by a thickness proxy (the log
// data value of the source bin) through a piecewise-linear lookup table.

namespace tomosim {

struct ScatterKernelRow {
  double thickness = 0.0;
  double narrow_amp = 0.0;   // A, intensity units relative to i0 = 1
  double wide_amp = 0.0;     // B
  double sigma_narrow = 1.0; // detector-length units
  double sigma_wide = 1.0;
};

struct ScatterKernelTable {
  std::vector<ScatterKernelRow> rows;  // strictly increasing thickness
  void validate() const;
};

// A(t) = a0 t exp(-t/5), B = 0.3 A, sigma1 = 2 + 0.8 t, sigma2 = 4 sigma1
// on t = 0..10; a0 scales the peak scatter to about 5% of the open
// intensity for the stock 256^2 phantom at alpha = 1
ScatterKernelTable default_scatter_table();

// CSV with header thickness,A,B,sigma1,sigma2
ScatterKernelTable read_scatter_table(const std::string& path);
void write_scatter_table(const ScatterKernelTable& table, const std::string& path);

// piecewise-linear interpolation, clamped at both table ends
ScatterKernelRow kernel_params(const ScatterKernelTable& table, double thickness);

// additive zero-mean Gaussian noise, std = fraction x mean(values)
Sinogram add_gaussian_noise(const Sinogram& sino, double fraction, std::uint64_t seed);

// scatter intensity S(u') accumulated over the source bins of one
// detector row; spacing converts bin distance to detector-length units
std::vector<double> scatter_field(std::span<const double> logdata_row,
                                  const ScatterKernelTable& table, double alpha,
                                  double i0, double spacing);

// per-row scatter corruption of log data: P' = -ln((I + S) / i0)
Sinogram apply_scatter(const Sinogram& sino, const ScatterKernelTable& table,
                       double alpha, double i0 = 1.0);

// the fixed scatter-study slice ranges for tall stacks; shorter stacks
// degrade every slice
std::vector<int> dataset_c_slices(int n_slices);

}

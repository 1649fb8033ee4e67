#pragma once

#include <string>
#include <vector>

#include "tomosim/grid.hpp"

// Parallel-beam Radon transform and its exact adjoint.
//
// Conventions: a ray at angle theta and detector offset t is the line
// {p : p.x cos(theta) + p.y sin(theta) = t}. Pixel centres sit at
// ((i - (w-1)/2) px, (j - (h-1)/2) px); detector bin m sits at
// t = (m - (bins-1)/2) spacing. Line integrals use interpolating
// (Joseph-style) marching along the dominant axis, so forward and back
// projection form a matched transpose pair.

namespace tomosim {

// n angles at (k + 1/2) pi / n, radians, strictly inside [0, pi)
std::vector<double> make_angle_grid(int n_angles);

struct ParallelGeometry {
  std::vector<double> angles;   // radians, strictly increasing, in [0, pi)
  int detector_bins = 0;
  double detector_spacing = 1.0;
  double fov_width = 0.0;       // physical width of the centred square field of view

  void validate() const;
  double t_of_bin(int m) const {
    return (m - 0.5 * (detector_bins - 1)) * detector_spacing;
  }
};

// detector spacing = pixel size, bins covering the image diagonal
ParallelGeometry default_geometry(int n_angles, int image_width, double pixel_size = 1.0);

struct Sinogram {
  ParallelGeometry geometry;
  std::vector<double> values;  // row-major, values[angle * bins + bin]

  Sinogram() = default;
  explicit Sinogram(const ParallelGeometry& g);
  int n_angles() const { return static_cast<int>(geometry.angles.size()); }
  int n_bins() const { return geometry.detector_bins; }
  double& at(int a, int m) { return values[static_cast<std::size_t>(a) * n_bins() + m]; }
  double at(int a, int m) const { return values[static_cast<std::size_t>(a) * n_bins() + m]; }
  bool same_shape(const Sinogram& o) const {
    return n_angles() == o.n_angles() && n_bins() == o.n_bins();
  }
};

// image must be square and covered by the detector extent
Sinogram radon_forward(const Grid2D& image, const ParallelGeometry& geom);

// exact transpose of radon_forward for an image_size^2 grid of the given
// pixel size
Grid2D back_project(const Sinogram& sino, int image_size, double pixel_size);

// factor-times finer grid via bilinear interpolation, same physical extent
Grid2D upsample_bilinear(const Grid2D& image, int factor);

// Beer-Lambert pair: intensity I = I0 exp(-P), log data P = -ln(I / I0)
Sinogram to_intensity(const Sinogram& logdata, double i0);
Sinogram to_logdata(const Sinogram& intensity, double i0);

// sinogram container: grid payload plus angle/detector keys in the sidecar
void write_sinogram(const Sinogram& sino, const std::string& path);
Sinogram read_sinogram(const std::string& path);

}

#pragma once

#include "tomosim/grid.hpp"

namespace tomosim {

// Peak signal-to-noise ratio in dB against the reference image.
// The peak is the reference's value range (max - min). Identical images
// give +infinity. Shape mismatch and a constant reference are errors.
double psnr(const Grid2D& reference, const Grid2D& test);

// Mean structural similarity over all fully interior 11x11 windows,
// Gaussian-weighted with sigma 1.5, stabilisers K1 = 0.01 and K2 = 0.03
// relative to the reference's value range. Images must be at least 11
// pixels in each dimension. ssim(x, x) is exactly 1.
double ssim(const Grid2D& reference, const Grid2D& test);

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double dynamic_range = 0.0;  // reference max - min
  int window = 11;
  bool identical = false;
};

QualityReport quality(const Grid2D& reference, const Grid2D& test);

}

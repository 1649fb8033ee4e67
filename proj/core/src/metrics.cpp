#include "tomosim/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "tomosim/errors.hpp"

namespace tomosim {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

double reference_range(const Grid2D& reference) {
  const auto [lo, hi] = std::minmax_element(reference.values.begin(), reference.values.end());
  const double range = *hi - *lo;
  if (range == 0.0) throw data_error("metrics: reference image is constant");
  return range;
}

void check_pair(const Grid2D& reference, const Grid2D& test) {
  if (!reference.same_shape(test)) throw data_error("metrics: image shapes differ");
  if (reference.values.empty()) throw data_error("metrics: empty image");
  require_finite(reference, "metrics reference");
  require_finite(test, "metrics test image");
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> w{};
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int k = 0; k < kWindow; ++k) {
    const double d = k - half;
    w[k] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

// separable valid-mode Gaussian blur; output is (w-10) x (h-10)
std::vector<double> blur_valid(const std::vector<double>& in, int width, int height) {
  static const std::array<double, kWindow> taps = gaussian_taps();
  const int ow = width - kWindow + 1;
  const int oh = height - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[k] * in[static_cast<std::size_t>(y) * width + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Grid2D& reference, const Grid2D& test) {
  check_pair(reference, test);
  const double range = reference_range(reference);
  double mse = 0.0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double d = reference.values[i] - test.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / mse);
}

double ssim(const Grid2D& reference, const Grid2D& test) {
  check_pair(reference, test);
  if (reference.width < kWindow || reference.height < kWindow)
    throw data_error("ssim: image smaller than the 11x11 window");
  const double range = reference_range(reference);
  const double c1 = (kK1 * range) * (kK1 * range);
  const double c2 = (kK2 * range) * (kK2 * range);

  const int w = reference.width;
  const int h = reference.height;
  const std::size_t n = reference.values.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = reference.values[i];
    const double b = test.values[i];
    xx[i] = a * a;
    yy[i] = b * b;
    xy[i] = a * b;
  }

  const auto mu_x = blur_valid(reference.values, w, h);
  const auto mu_y = blur_valid(test.values, w, h);
  const auto m_xx = blur_valid(xx, w, h);
  const auto m_yy = blur_valid(yy, w, h);
  const auto m_xy = blur_valid(xy, w, h);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i];
    const double my = mu_y[i];
    const double var_x = m_xx[i] - mx * mx;
    const double var_y = m_yy[i] - my * my;
    const double cov = m_xy[i] - mx * my;
    const double numerator = (2.0 * mx * my + c1) * (2.0 * cov + c2);
    const double denominator = (mx * mx + my * my + c1) * (var_x + var_y + c2);
    total += numerator / denominator;
  }
  return total / static_cast<double>(mu_x.size());
}

QualityReport quality(const Grid2D& reference, const Grid2D& test) {
  QualityReport report;
  report.psnr = psnr(reference, test);
  report.ssim = ssim(reference, test);
  report.dynamic_range = reference_range(reference);
  report.window = kWindow;
  report.identical = std::isinf(report.psnr);
  return report;
}

}

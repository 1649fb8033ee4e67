#include "tomosim/recon.hpp"

#include <algorithm>
#include <cmath>

#include "fft.hpp"

namespace tomosim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

SamplingScheme make_sampling(SamplingKind kind, const std::vector<double>& parent_angles,
                             std::vector<int> custom_indices) {
  const int n = static_cast<int>(parent_angles.size());
  SamplingScheme scheme;
  scheme.kind = kind;
  switch (kind) {
    case SamplingKind::full:
      for (int k = 0; k < n; ++k) scheme.indices.push_back(k);
      break;
    case SamplingKind::sampling1:
      if (n != 50) throw data_error("sampling1 is defined on the 50-angle parent grid");
      for (int k = 10; k <= 39; ++k) scheme.indices.push_back(k);
      break;
    case SamplingKind::sampling2:
      if (n != 50) throw data_error("sampling2 is defined on the 50-angle parent grid");
      for (int k = 0; k <= 14; ++k) scheme.indices.push_back(k);
      for (int k = 35; k <= 49; ++k) scheme.indices.push_back(k);
      break;
    case SamplingKind::custom:
      if (custom_indices.empty())
        throw data_error("custom sampling requires explicit angle indices");
      scheme.indices = std::move(custom_indices);
      break;
  }
  for (std::size_t i = 0; i < scheme.indices.size(); ++i) {
    if (scheme.indices[i] < 0 || scheme.indices[i] >= n)
      throw data_error("sampling: index outside the parent angle grid");
    if (i > 0 && scheme.indices[i] <= scheme.indices[i - 1])
      throw data_error("sampling: indices must be strictly increasing");
  }
  return scheme;
}

double missing_wedge_deg(const SamplingScheme& scheme,
                         const std::vector<double>& parent_angles) {
  if (scheme.indices.empty()) throw data_error("missing wedge: empty scheme");
  if (scheme.indices.size() == parent_angles.size()) return 0.0;
  const auto n = static_cast<long long>(parent_angles.size());

  // on the uniform half circle grid the wedge is an exact index count times
  // 180/n, which keeps decimal widths like 75.6 bit for bit
  bool uniform = true;
  for (long long k = 0; k < n; ++k)
    if (std::abs(parent_angles[k] - (k + 0.5) * kPi / static_cast<double>(n)) > 1e-9)
      uniform = false;
  const auto span_deg = [&](long long index_count) {
    return static_cast<double>(index_count * 180) / static_cast<double>(n);
  };

  bool contiguous = true;
  int gap_lo = -1, gap_hi = -1;
  for (std::size_t i = 1; i < scheme.indices.size(); ++i) {
    if (scheme.indices[i] != scheme.indices[i - 1] + 1) {
      contiguous = false;
      gap_lo = scheme.indices[i - 1];
      gap_hi = scheme.indices[i];
      break;
    }
  }

  const double deg = 180.0 / kPi;
  if (contiguous) {
    // the window leaves this much of the half circle uncovered
    const long long kept_span = scheme.indices.back() - scheme.indices.front();
    if (uniform) return span_deg(n - kept_span);
    return 180.0 -
           (parent_angles.at(scheme.indices.back()) - parent_angles.at(scheme.indices.front())) *
               deg;
  }
  // split flanks: the wedge is the gap between the kept runs
  if (uniform) return span_deg(gap_hi - gap_lo);
  return (parent_angles.at(gap_hi) - parent_angles.at(gap_lo)) * deg;
}

Sinogram select_angles(const Sinogram& sino, const SamplingScheme& scheme) {
  sino.geometry.validate();
  if (scheme.indices.empty()) throw data_error("select_angles: empty scheme");
  Sinogram out;
  out.geometry = sino.geometry;
  out.geometry.angles.clear();
  const int bins = sino.n_bins();
  for (int idx : scheme.indices) {
    if (idx < 0 || idx >= sino.n_angles())
      throw data_error("select_angles: index outside the sinogram");
    out.geometry.angles.push_back(sino.geometry.angles[idx]);
    const auto* row = &sino.values[static_cast<std::size_t>(idx) * bins];
    out.values.insert(out.values.end(), row, row + bins);
  }
  out.geometry.validate();
  return out;
}

namespace {

// ramp-filter one detector row; |f| response through a zero-padded FFT
std::vector<double> ramp_filter_row(const double* row, int bins, double spacing,
                                    double cutoff) {
  const std::size_t padded = detail::next_pow2(static_cast<std::size_t>(2) * bins);
  std::vector<std::complex<double>> buf(padded, 0.0);
  for (int m = 0; m < bins; ++m) buf[m] = row[m];
  detail::fft_pow2(buf, false);

  // frequency of slot k is min(k, n-k) / (n spacing); the cutoff is a
  // fraction of the Nyquist frequency, compared in index units so the
  // boundary slot is kept exactly at cutoff = 1
  const double n = static_cast<double>(padded);
  const double keep = cutoff * 0.5 * n;
  for (std::size_t k = 0; k < padded; ++k) {
    const double kf = static_cast<double>(std::min(k, padded - k));
    const double response = kf <= keep ? kf / (n * spacing) : 0.0;
    buf[k] *= response;
  }
  detail::fft_pow2(buf, true);

  std::vector<double> out(bins);
  for (int m = 0; m < bins; ++m) out[m] = buf[m].real();
  return out;
}

void check_recon_inputs(const Sinogram& sino, const ReconSettings& settings) {
  sino.geometry.validate();
  if (settings.output_size < 1) throw data_error("recon: output size must be positive");
  if (settings.cutoff <= 0.0 || settings.cutoff > 1.0)
    throw data_error("recon: cutoff must be in (0, 1]");
  if (sino.values.size() !=
      sino.geometry.angles.size() * static_cast<std::size_t>(sino.n_bins()))
    throw data_error("recon: sinogram value count mismatch");
  for (double v : sino.values)
    if (!std::isfinite(v)) throw data_error("recon: non-finite sinogram sample");
}

}  // namespace

Grid2D fbp(const Sinogram& sino, const ReconSettings& settings) {
  check_recon_inputs(sino, settings);

  const int bins = sino.n_bins();
  const int n_angles = sino.n_angles();
  const int size = settings.output_size;
  const double px = sino.geometry.fov_width / size;
  const double spacing = sino.geometry.detector_spacing;
  const double half = 0.5 * (size - 1);
  const double half_bins = 0.5 * (bins - 1);

  // filter all rows first
  std::vector<double> filtered(static_cast<std::size_t>(n_angles) * bins);
  for (int a = 0; a < n_angles; ++a) {
    const double* row = &sino.values[static_cast<std::size_t>(a) * bins];
    if (settings.filter == FilterKind::ramp) {
      const auto q = ramp_filter_row(row, bins, spacing, settings.cutoff);
      std::copy(q.begin(), q.end(), filtered.begin() + static_cast<std::size_t>(a) * bins);
    } else {
      std::copy(row, row + bins, filtered.begin() + static_cast<std::size_t>(a) * bins);
    }
  }

  Grid2D image(size, size, 0.0, px);
  const double weight = kPi / n_angles;
  for (int a = 0; a < n_angles; ++a) {
    const double c = std::cos(sino.geometry.angles[a]);
    const double s = std::sin(sino.geometry.angles[a]);
    const double* q = &filtered[static_cast<std::size_t>(a) * bins];
    for (int y = 0; y < size; ++y) {
      const double py = (y - half) * px;
      for (int x = 0; x < size; ++x) {
        const double t = (x - half) * px * c + py * s;
        const double u = t / spacing + half_bins;
        const int m0 = static_cast<int>(std::floor(u));
        const double f = u - m0;
        double v = 0.0;
        if (m0 >= 0 && m0 < bins) v += (1.0 - f) * q[m0];
        if (m0 + 1 >= 0 && m0 + 1 < bins) v += f * q[m0 + 1];
        image.at(x, y) += weight * v;
      }
    }
  }
  return image;
}

CglsResult cgls(const Sinogram& sino, const ReconSettings& settings) {
  check_recon_inputs(sino, settings);
  if (settings.iterations < 0) throw data_error("cgls: iteration count must be >= 0");

  const int size = settings.output_size;
  const double px = sino.geometry.fov_width / size;
  const auto& geom = sino.geometry;

  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  CglsResult result;
  result.image = Grid2D(size, size, 0.0, px);

  // x0 = 0, so r = b and s = A^T b
  Sinogram r = sino;
  Grid2D s_img = back_project(r, size, px);
  Grid2D p = s_img;
  double gamma = 0.0;
  for (double v : s_img.values) gamma += v * v;

  for (int it = 0; it < settings.iterations; ++it) {
    if (gamma == 0.0) {
      result.breakdown = true;
      break;
    }
    const Sinogram q = radon_forward(p, geom);
    double qq = 0.0;
    for (double v : q.values) qq += v * v;
    if (qq == 0.0) {
      result.breakdown = true;
      break;
    }
    const double alpha = gamma / qq;
    for (std::size_t i = 0; i < result.image.values.size(); ++i)
      result.image.values[i] += alpha * p.values[i];
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] -= alpha * q.values[i];
    result.residual_norms.push_back(norm(r.values));

    s_img = back_project(r, size, px);
    double gamma_next = 0.0;
    for (double v : s_img.values) gamma_next += v * v;
    const double beta = gamma_next / gamma;
    for (std::size_t i = 0; i < p.values.size(); ++i)
      p.values[i] = s_img.values[i] + beta * p.values[i];
    gamma = gamma_next;
  }
  return result;
}

}

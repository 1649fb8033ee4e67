#include "tomosim/degrade.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tomosim/rng.hpp"

namespace tomosim {

void ScatterKernelTable::validate() const {
  if (rows.empty()) throw data_error("scatter table: empty");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!(r.thickness >= 0.0)) throw data_error("scatter table: negative thickness");
    if (i > 0 && !(r.thickness > rows[i - 1].thickness))
      throw data_error("scatter table: thickness must be strictly increasing");
    if (r.narrow_amp < 0.0 || r.wide_amp < 0.0)
      throw data_error("scatter table: amplitudes must be non-negative");
    if (!(r.sigma_narrow > 0.0) || r.sigma_wide < r.sigma_narrow)
      throw data_error("scatter table: need 0 < sigma1 <= sigma2");
  }
}

ScatterKernelTable default_scatter_table() {
  // a0 fixed so the stock 256^2 phantom peaks near 5% scatter-to-open
  // intensity at alpha = 1
  const double a0 = 9.5e-4;
  ScatterKernelTable table;
  for (int t = 0; t <= 10; ++t) {
    ScatterKernelRow row;
    row.thickness = t;
    row.narrow_amp = a0 * t * std::exp(-0.2 * t);
    row.wide_amp = 0.3 * row.narrow_amp;
    row.sigma_narrow = 2.0 + 0.8 * t;
    row.sigma_wide = 4.0 * row.sigma_narrow;
    table.rows.push_back(row);
  }
  table.validate();
  return table;
}

ScatterKernelTable read_scatter_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw data_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "thickness,A,B,sigma1,sigma2")
    throw data_error(path + ": expected header thickness,A,B,sigma1,sigma2");

  ScatterKernelTable table;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ScatterKernelRow row;
    char c1, c2, c3, c4;
    std::istringstream in(line);
    if (!(in >> row.thickness >> c1 >> row.narrow_amp >> c2 >> row.wide_amp >> c3 >>
          row.sigma_narrow >> c4 >> row.sigma_wide) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || (in >> std::ws, !in.eof()))
      throw data_error(path + ":" + std::to_string(line_no) + ": malformed row");
    table.rows.push_back(row);
  }
  table.validate();
  return table;
}

void write_scatter_table(const ScatterKernelTable& table, const std::string& path) {
  table.validate();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw data_error("cannot open for writing: " + path);
  f << "thickness,A,B,sigma1,sigma2\n";
  f.precision(17);
  for (const auto& r : table.rows)
    f << r.thickness << "," << r.narrow_amp << "," << r.wide_amp << ","
      << r.sigma_narrow << "," << r.sigma_wide << "\n";
}

ScatterKernelRow kernel_params(const ScatterKernelTable& table, double thickness) {
  table.validate();
  if (!(thickness >= 0.0)) throw data_error("kernel_params: thickness must be >= 0");
  const auto& rows = table.rows;
  if (thickness <= rows.front().thickness) {
    ScatterKernelRow r = rows.front();
    r.thickness = thickness;
    return r;
  }
  if (thickness >= rows.back().thickness) {
    ScatterKernelRow r = rows.back();
    r.thickness = thickness;
    return r;
  }
  std::size_t hi = 1;
  while (rows[hi].thickness < thickness) ++hi;
  const auto& a = rows[hi - 1];
  const auto& b = rows[hi];
  const double f = (thickness - a.thickness) / (b.thickness - a.thickness);
  ScatterKernelRow r;
  r.thickness = thickness;
  r.narrow_amp = a.narrow_amp + f * (b.narrow_amp - a.narrow_amp);
  r.wide_amp = a.wide_amp + f * (b.wide_amp - a.wide_amp);
  r.sigma_narrow = a.sigma_narrow + f * (b.sigma_narrow - a.sigma_narrow);
  r.sigma_wide = a.sigma_wide + f * (b.sigma_wide - a.sigma_wide);
  return r;
}

Sinogram add_gaussian_noise(const Sinogram& sino, double fraction, std::uint64_t seed) {
  if (fraction < 0.0) throw data_error("noise: fraction must be non-negative");
  if (sino.values.empty()) throw data_error("noise: empty sinogram");
  if (fraction == 0.0) return sino;

  double mean = 0.0;
  for (double v : sino.values) mean += v;
  mean /= static_cast<double>(sino.values.size());
  if (mean < 0.0) throw data_error("noise: sinogram mean is negative");

  const double std_dev = fraction * mean;
  Sinogram out = sino;
  Rng rng(seed);
  for (double& v : out.values) v += std_dev * rng.normal();
  return out;
}

std::vector<double> scatter_field(std::span<const double> logdata_row,
                                  const ScatterKernelTable& table, double alpha,
                                  double i0, double spacing) {
  table.validate();
  if (alpha < 0.0) throw data_error("scatter: alpha must be non-negative");
  if (!(i0 > 0.0)) throw data_error("scatter: i0 must be positive");
  if (!(spacing > 0.0)) throw data_error("scatter: spacing must be positive");

  const std::size_t n = logdata_row.size();
  std::vector<double> field(n, 0.0);
  if (alpha == 0.0) return field;

  for (std::size_t u = 0; u < n; ++u) {
    const double thickness = std::max(logdata_row[u], 0.0);
    const ScatterKernelRow k = kernel_params(table, thickness);
    if (k.narrow_amp == 0.0 && k.wide_amp == 0.0) continue;
    const double inv_n = 1.0 / (2.0 * k.sigma_narrow * k.sigma_narrow);
    const double inv_w = 1.0 / (2.0 * k.sigma_wide * k.sigma_wide);
    for (std::size_t t = 0; t < n; ++t) {
      const double d = (static_cast<double>(u) - static_cast<double>(t)) * spacing;
      const double d2 = d * d;
      field[t] += k.narrow_amp * std::exp(-d2 * inv_n) + k.wide_amp * std::exp(-d2 * inv_w);
    }
  }
  // alpha applied as a single factor so the field scales exactly linearly;
  // table amplitudes are fractions of i0 = 1
  const double scale = alpha * i0;
  for (double& v : field) v *= scale;
  return field;
}

Sinogram apply_scatter(const Sinogram& sino, const ScatterKernelTable& table,
                       double alpha, double i0) {
  const int bins = sino.n_bins();
  Sinogram out = sino;
  for (int a = 0; a < sino.n_angles(); ++a) {
    const std::span<const double> row(&sino.values[static_cast<std::size_t>(a) * bins],
                                      static_cast<std::size_t>(bins));
    const auto field = scatter_field(row, table, alpha, i0, sino.geometry.detector_spacing);
    for (int m = 0; m < bins; ++m) {
      const double p = row[m];
      const double s = field[m];
      // P' = -ln((I + S)/i0) = P - ln(1 + S e^P / i0); exact identity at S = 0
      out.at(a, m) = s == 0.0 ? p : p - std::log1p(s * std::exp(p) / i0);
    }
  }
  return out;
}

std::vector<int> dataset_c_slices(int n_slices) {
  if (n_slices < 1) throw data_error("dataset_c_slices: empty stack");
  std::vector<int> idx;
  if (n_slices >= 545) {
    for (int i = 195; i <= 214; ++i) idx.push_back(i);
    for (int i = 365; i <= 404; ++i) idx.push_back(i);
    for (int i = 525; i <= 544; ++i) idx.push_back(i);
  } else {
    for (int i = 0; i < n_slices; ++i) idx.push_back(i);
  }
  return idx;
}

}

#include "tomosim/projector.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace tomosim {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string container_base(const std::string& path) {
  for (const char* ext : {".meta", ".raw"}) {
    const std::size_t n = std::char_traits<char>::length(ext);
    if (path.size() > n && path.compare(path.size() - n, n, ext) == 0)
      return path.substr(0, path.size() - n);
  }
  return path;
}

}  // namespace

std::vector<double> make_angle_grid(int n_angles) {
  if (n_angles < 1) throw data_error("angle grid: need at least one angle");
  std::vector<double> angles(n_angles);
  for (int k = 0; k < n_angles; ++k) angles[k] = (k + 0.5) * kPi / n_angles;
  return angles;
}

void ParallelGeometry::validate() const {
  if (angles.empty()) throw data_error("geometry: no angles");
  for (std::size_t k = 0; k < angles.size(); ++k) {
    if (!(angles[k] >= 0.0 && angles[k] < kPi))
      throw data_error("geometry: angles must lie in [0, pi)");
    if (k > 0 && !(angles[k] > angles[k - 1]))
      throw data_error("geometry: angles must be strictly increasing");
  }
  if (detector_bins < 1) throw data_error("geometry: detector_bins must be positive");
  if (!(detector_spacing > 0.0)) throw data_error("geometry: detector_spacing must be positive");
  if (!(fov_width > 0.0)) throw data_error("geometry: fov_width must be positive");
  if (detector_bins * detector_spacing < fov_width * std::sqrt(2.0))
    throw data_error("geometry: detector extent under-covers the field of view diagonal");
}

ParallelGeometry default_geometry(int n_angles, int image_width, double pixel_size) {
  if (image_width < 1) throw data_error("geometry: image width must be positive");
  ParallelGeometry g;
  g.angles = make_angle_grid(n_angles);
  g.detector_bins = static_cast<int>(std::ceil(image_width * std::sqrt(2.0)));
  g.detector_spacing = pixel_size;
  g.fov_width = image_width * pixel_size;
  g.validate();
  return g;
}

Sinogram::Sinogram(const ParallelGeometry& g) : geometry(g) {
  geometry.validate();
  values.assign(geometry.angles.size() * static_cast<std::size_t>(geometry.detector_bins), 0.0);
}

namespace {

struct RaySetup {
  bool march_rows;   // true: step over rows y, interpolate along x
  double inv_dom;    // 1 / |cos| or 1 / |sin|
  double slope;      // index step of the interpolation point per marching step
  double offset;     // interpolation index at marching index 0, minus bin term
  double t_scale;    // dt of one detector bin in interpolation index units
};

// Predigests angle geometry for a w x w image with pixel size px.
// For |cos| >= |sin| the ray crosses every row j at
//   u(j) = (t - y_j sin) / (cos px) + (w-1)/2
// which is affine in both j and the bin index m.
RaySetup setup_angle(double theta, int w, double px, double spacing) {
  RaySetup r{};
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double half = 0.5 * (w - 1);
  r.march_rows = std::abs(c) >= std::abs(s);
  const double dom = r.march_rows ? c : s;
  const double other = r.march_rows ? s : c;
  r.inv_dom = 1.0 / std::abs(dom);
  // u(j, m) = (t_m - p_j * other) / (dom * px) + half, with p_j = (j - half) px
  r.slope = -other / dom;                       // du per marching step
  r.offset = half * other / dom + half;         // u at j = 0 for t = 0
  r.t_scale = spacing / (dom * px);             // du per detector bin
  return r;
}

}  // namespace

Sinogram radon_forward(const Grid2D& image, const ParallelGeometry& geom) {
  geom.validate();
  require_finite(image, "radon_forward");
  if (image.width != image.height) throw data_error("radon_forward: image must be square");
  if (image.width < 1) throw data_error("radon_forward: empty image");
  const double diag = image.physical_width() * std::sqrt(2.0);
  if (geom.detector_bins * geom.detector_spacing < diag)
    throw data_error("radon_forward: geometry under-covers the image");

  const int w = image.width;
  const int bins = geom.detector_bins;
  const double px = image.pixel_size;
  const double half_bins = 0.5 * (bins - 1);

  Sinogram sino(geom);
  for (int a = 0; a < sino.n_angles(); ++a) {
    const RaySetup r = setup_angle(geom.angles[a], w, px, geom.detector_spacing);
    const double weight = px * r.inv_dom;
    for (int m = 0; m < bins; ++m) {
      const double u0 = r.offset + (m - half_bins) * r.t_scale;
      double sum = 0.0;
      for (int j = 0; j < w; ++j) {
        const double u = u0 + r.slope * j;
        const int i0 = static_cast<int>(std::floor(u));
        const double f = u - i0;
        double v = 0.0;
        if (r.march_rows) {
          if (i0 >= 0 && i0 < w) v += (1.0 - f) * image.at(i0, j);
          if (i0 + 1 >= 0 && i0 + 1 < w) v += f * image.at(i0 + 1, j);
        } else {
          if (i0 >= 0 && i0 < w) v += (1.0 - f) * image.at(j, i0);
          if (i0 + 1 >= 0 && i0 + 1 < w) v += f * image.at(j, i0 + 1);
        }
        sum += v;
      }
      sino.at(a, m) = sum * weight;
    }
  }
  return sino;
}

Grid2D back_project(const Sinogram& sino, int image_size, double pixel_size) {
  sino.geometry.validate();
  if (image_size < 1) throw data_error("back_project: image size must be positive");
  if (!(pixel_size > 0.0)) throw data_error("back_project: pixel size must be positive");
  if (sino.values.size() !=
      sino.geometry.angles.size() * static_cast<std::size_t>(sino.n_bins()))
    throw data_error("back_project: sinogram value count mismatch");

  const int w = image_size;
  const int bins = sino.n_bins();
  const double half_bins = 0.5 * (bins - 1);

  Grid2D image(w, w, 0.0, pixel_size);
  for (int a = 0; a < sino.n_angles(); ++a) {
    const RaySetup r = setup_angle(sino.geometry.angles[a], w, pixel_size,
                                   sino.geometry.detector_spacing);
    const double weight = pixel_size * r.inv_dom;
    for (int m = 0; m < bins; ++m) {
      const double u0 = r.offset + (m - half_bins) * r.t_scale;
      const double v = sino.at(a, m) * weight;
      for (int j = 0; j < w; ++j) {
        const double u = u0 + r.slope * j;
        const int i0 = static_cast<int>(std::floor(u));
        const double f = u - i0;
        if (r.march_rows) {
          if (i0 >= 0 && i0 < w) image.at(i0, j) += (1.0 - f) * v;
          if (i0 + 1 >= 0 && i0 + 1 < w) image.at(i0 + 1, j) += f * v;
        } else {
          if (i0 >= 0 && i0 < w) image.at(j, i0) += (1.0 - f) * v;
          if (i0 + 1 >= 0 && i0 + 1 < w) image.at(j, i0 + 1) += f * v;
        }
      }
    }
  }
  return image;
}

Grid2D upsample_bilinear(const Grid2D& image, int factor) {
  if (factor < 1) throw data_error("upsample: factor must be at least 1");
  require_finite(image, "upsample");
  if (factor == 1) return image;

  const int w = image.width, h = image.height;
  Grid2D out(w * factor, h * factor, 0.0, image.pixel_size / factor);
  for (int y = 0; y < out.height; ++y) {
    // output sample centres mapped into input pixel-centre coordinates
    double sy = (y + 0.5) / factor - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const int y0 = std::min(static_cast<int>(sy), h - 2 >= 0 ? h - 2 : 0);
    const double fy = h > 1 ? sy - y0 : 0.0;
    for (int x = 0; x < out.width; ++x) {
      double sx = (x + 0.5) / factor - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const int x0 = std::min(static_cast<int>(sx), w - 2 >= 0 ? w - 2 : 0);
      const double fx = w > 1 ? sx - x0 : 0.0;
      const double top = (1.0 - fx) * image.at(x0, y0) + fx * image.at(std::min(x0 + 1, w - 1), y0);
      const int y1 = std::min(y0 + 1, h - 1);
      const double bot = (1.0 - fx) * image.at(x0, y1) + fx * image.at(std::min(x0 + 1, w - 1), y1);
      out.at(x, y) = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

Sinogram to_intensity(const Sinogram& logdata, double i0) {
  if (!(i0 > 0.0)) throw data_error("to_intensity: i0 must be positive");
  Sinogram out = logdata;
  for (double& v : out.values) v = i0 * std::exp(-v);
  return out;
}

Sinogram to_logdata(const Sinogram& intensity, double i0) {
  if (!(i0 > 0.0)) throw data_error("to_logdata: i0 must be positive");
  Sinogram out = intensity;
  const int bins = out.n_bins();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (!(out.values[i] > 0.0))
      throw data_error("to_logdata: non-positive intensity at angle " +
                       std::to_string(i / bins) + ", bin " + std::to_string(i % bins));
    out.values[i] = -std::log(out.values[i] / i0);
  }
  return out;
}

void write_sinogram(const Sinogram& sino, const std::string& path) {
  sino.geometry.validate();
  const std::string base = container_base(path);
  Grid2D g;
  g.width = sino.n_bins();
  g.height = sino.n_angles();
  g.pixel_size = sino.geometry.detector_spacing;
  g.values = sino.values;
  write_grid(g, base);

  // append the geometry keys to the sidecar the grid writer produced
  std::ofstream meta(base + ".meta", std::ios::app);
  if (!meta) throw data_error("cannot extend sidecar: " + base + ".meta");
  meta << "type=sinogram\n" << "fov_width=" << std::hexfloat << sino.geometry.fov_width
       << "\n" << "angles_rad=";
  meta << std::hexfloat;
  for (std::size_t k = 0; k < sino.geometry.angles.size(); ++k)
    meta << (k ? "," : "") << sino.geometry.angles[k];
  meta << "\n";
}

Sinogram read_sinogram(const std::string& path) {
  const std::string base = container_base(path);
  const Grid2D g = read_grid(base);

  std::ifstream f(base + ".meta");
  if (!f) throw data_error("cannot open: " + base + ".meta");
  std::string line, angles_line, fov_line;
  while (std::getline(f, line)) {
    if (line.rfind("angles_rad=", 0) == 0) angles_line = line.substr(11);
    if (line.rfind("fov_width=", 0) == 0) fov_line = line.substr(10);
  }
  if (angles_line.empty() || fov_line.empty())
    throw data_error(base + ": sidecar lacks sinogram geometry keys");

  Sinogram sino;
  sino.geometry.detector_bins = g.width;
  sino.geometry.detector_spacing = g.pixel_size;
  sino.geometry.fov_width = std::strtod(fov_line.c_str(), nullptr);
  std::istringstream in(angles_line);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    sino.geometry.angles.push_back(std::strtod(tok.c_str(), nullptr));
  }
  if (static_cast<int>(sino.geometry.angles.size()) != g.height)
    throw data_error(base + ": angle count does not match row count");
  sino.geometry.validate();
  sino.values = g.values;
  return sino;
}

}

#include "tomosim/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tomosim/rng.hpp"

namespace tomosim {

void PhantomSpec::validate() const {
  if (grid_size < 8) throw data_error("phantom: grid_size must be at least 8");
  if (outer_radius <= 0.0 || outer_radius > 1.0)
    throw data_error("phantom: outer_radius must be in (0, 1]");
  if (skin_thickness < 0.0 || skin_thickness >= 1.0)
    throw data_error("phantom: skin_thickness must be in [0, 1)");
  if (flesh_attenuation <= 0.0 || skin_attenuation <= 0.0 || core_attenuation <= 0.0)
    throw data_error("phantom: tissue attenuations must be positive");
  if (core_radius < 0.0 || core_radius >= outer_radius)
    throw data_error("phantom: core_radius must be in [0, outer_radius)");
  for (const auto& d : defects) {
    if (d.count_min < 0 || d.count_max < d.count_min)
      throw data_error("phantom: defect count range invalid");
    if (d.radius_min <= 0.0 || d.radius_max < d.radius_min)
      throw data_error("phantom: defect radius range invalid");
    if (d.label == LabelClass::background || d.label == LabelClass::healthy)
      throw data_error("phantom: defect label must be a defect class");
    if (flesh_attenuation + d.attenuation_offset < 0.0)
      throw data_error("phantom: defect attenuation would go negative");
  }
}

PhantomSpec default_phantom_spec() {
  PhantomSpec spec;
  const double flesh = spec.flesh_attenuation;
  spec.defects = {
      {LabelClass::bitterpit, 0, 8, 0.008, 0.020, 0.55 * flesh},
      {LabelClass::holes, 0, 3, 0.015, 0.045, -0.98 * flesh},
      {LabelClass::rot, 0, 2, 0.050, 0.120, -0.30 * flesh},
      {LabelClass::browning, 0, 4, 0.025, 0.080, -0.10 * flesh},
  };
  return spec;
}

namespace {

struct Ellipse {
  double cx, cy;      // pixel coordinates relative to grid centre
  double a, b;        // semi-axes in pixels, a >= b
  double cos_t, sin_t;
  bool contains(double dx, double dy) const {
    const double u = (dx * cos_t + dy * sin_t) / a;
    const double v = (-dx * sin_t + dy * cos_t) / b;
    return u * u + v * v <= 1.0;
  }
};

LabelClass parse_defect_class(const std::string& name, const std::string& where) {
  const auto& names = default_class_names();
  for (std::size_t i = 2; i < names.size(); ++i)
    if (names[i] == name) return static_cast<LabelClass>(i);
  throw data_error(where + ": unknown defect class '" + name + "'");
}

std::pair<double, double> parse_range(const std::string& s, const std::string& where) {
  // "a-b" with b optional; the split dash is searched after position 0 so
  // a leading minus sign still parses
  const auto dash = s.find('-', 1);
  try {
    if (dash == std::string::npos) {
      const double v = std::stod(s);
      return {v, v};
    }
    return {std::stod(s.substr(0, dash)), std::stod(s.substr(dash + 1))};
  } catch (...) {
    throw data_error(where + ": bad range '" + s + "'");
  }
}

}  // namespace

PhantomSpec load_phantom_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open: " + path);

  PhantomSpec spec = default_phantom_spec();
  spec.defects.clear();
  std::map<std::string, DefectSpec> defect_map;

  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw data_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    const std::string where = path + ":" + std::to_string(line_no);

    try {
      if (key == "grid_size") spec.grid_size = std::stoi(val);
      else if (key == "outer_radius") spec.outer_radius = std::stod(val);
      else if (key == "skin_thickness") spec.skin_thickness = std::stod(val);
      else if (key == "flesh_attenuation") spec.flesh_attenuation = std::stod(val);
      else if (key == "skin_attenuation") spec.skin_attenuation = std::stod(val);
      else if (key == "core_radius") spec.core_radius = std::stod(val);
      else if (key == "core_attenuation") spec.core_attenuation = std::stod(val);
      else if (key == "seed") spec.seed = std::stoull(val);
      else if (key.rfind("defect.", 0) == 0) {
        const auto second = key.find('.', 7);
        if (second == std::string::npos)
          throw data_error(where + ": expected defect.<class>.<field>");
        const std::string cls = key.substr(7, second - 7);
        const std::string field = key.substr(second + 1);
        DefectSpec& d = defect_map[cls];
        d.label = parse_defect_class(cls, where);
        if (field == "count") {
          const auto [lo, hi] = parse_range(val, where);
          d.count_min = static_cast<int>(lo);
          d.count_max = static_cast<int>(hi);
        } else if (field == "radius") {
          std::tie(d.radius_min, d.radius_max) = parse_range(val, where);
        } else if (field == "offset") {
          d.attenuation_offset = std::stod(val);
        } else {
          throw data_error(where + ": unknown defect field '" + field + "'");
        }
      } else {
        throw data_error(where + ": unknown key '" + key + "'");
      }
    } catch (const data_error&) {
      throw;
    } catch (...) {
      throw data_error(where + ": bad value '" + val + "'");
    }
  }

  // keep the stock class order so painting precedence is stable
  for (const auto& name : default_defect_names()) {
    auto it = defect_map.find(name);
    if (it != defect_map.end()) spec.defects.push_back(it->second);
  }
  spec.validate();
  return spec;
}

LabeledSlice generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const int n = spec.grid_size;
  const double half = 0.5 * (n - 1);
  const double R = spec.outer_radius * 0.5 * n;
  const double r_flesh = R * (1.0 - spec.skin_thickness);
  const double r_core = spec.core_radius * 0.5 * n;

  LabeledSlice slice;
  slice.image = Grid2D(n, n, 0.0, 1.0);
  slice.labels = LabelGrid(n, n);

  Rng rng(spec.seed);

  // place every blob first so the paint pass is a single sweep
  struct Blob {
    Ellipse e;
    LabelClass label;
    double attenuation;
  };
  std::vector<Blob> blobs;
  for (const auto& d : spec.defects) {
    const int count =
        d.count_min + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(d.count_max - d.count_min) + 1));
    for (int k = 0; k < count; ++k) {
      double a = 0.0;
      int tries = 0;
      for (;; ++tries) {
        if (tries >= 100)
          throw data_error("phantom: defect placement impossible for class '" +
                           default_class_names()[static_cast<int>(d.label)] + "'");
        a = rng.uniform(d.radius_min, d.radius_max) * 0.5 * n;
        if (a < R) break;
      }
      const double b = a * rng.uniform(0.55, 1.0);
      const double tilt = rng.uniform(0.0, 3.14159265358979323846);
      const double rad = (R - a) * std::sqrt(rng.uniform());
      const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      blobs.push_back({{rad * std::cos(ang), rad * std::sin(ang), a, b,
                        std::cos(tilt), std::sin(tilt)},
                       d.label,
                       spec.flesh_attenuation + d.attenuation_offset});
    }
  }

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dx = x - half;
      const double dy = y - half;
      const double r = std::sqrt(dx * dx + dy * dy);
      if (r > R) continue;  // background stays 0 / code 0

      double att = spec.flesh_attenuation;
      if (r > r_flesh) {
        att = spec.skin_attenuation;
      } else {
        const double phi = std::atan2(dy, dx);
        if (r <= r_core * (1.0 + 0.25 * std::cos(5.0 * phi))) att = spec.core_attenuation;
      }
      LabelClass label = LabelClass::healthy;

      for (const auto& blob : blobs) {
        if (blob.e.contains(dx, dy)) {
          att = blob.attenuation;
          label = blob.label;
        }
      }
      slice.image.at(x, y) = att;
      slice.labels.at(x, y) = static_cast<std::uint8_t>(label);
    }
  }
  slice.validate();
  return slice;
}

std::vector<PhantomItem> generate_collection(const PhantomSpec& base, int n_items,
                                             int slices_per_item, std::uint64_t master_seed,
                                             const CollectionOptions& opts) {
  base.validate();
  if (n_items < 1 || slices_per_item < 1)
    throw data_error("collection: item and slice counts must be positive");
  if (opts.prevalence < 0.0 || opts.prevalence > 1.0)
    throw data_error("collection: prevalence must be in [0, 1]");
  if (opts.burden_min <= 0.0 || opts.burden_max < opts.burden_min)
    throw data_error("collection: burden range invalid");

  std::vector<PhantomItem> items;
  items.reserve(n_items);
  for (int i = 0; i < n_items; ++i) {
    Rng item_rng(derive_seed(master_seed, static_cast<std::uint64_t>(i)));

    PhantomSpec spec = base;
    for (auto& d : spec.defects) {
      if (item_rng.uniform() >= opts.prevalence) {
        d.count_min = d.count_max = 0;
        continue;
      }
      const double burden = item_rng.uniform(opts.burden_min, opts.burden_max);
      d.count_min = std::max(1, static_cast<int>(std::lround(d.count_min * burden)));
      d.count_max = std::max(d.count_min, static_cast<int>(std::lround(d.count_max * burden)));
    }

    PhantomItem item;
    item.id = std::to_string(i + 1);
    item.slices.reserve(slices_per_item);
    for (int s = 0; s < slices_per_item; ++s) {
      PhantomSpec slice_spec = spec;
      slice_spec.seed = derive_seed(master_seed, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(s) + 1);
      item.slices.push_back(generate_phantom(slice_spec));
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<long long> label_counts(const LabeledSlice& slice) {
  slice.validate();
  std::vector<long long> counts(slice.labels.class_names.size(), 0);
  for (std::uint8_t c : slice.labels.codes) ++counts[c];
  return counts;
}

namespace {

DefectTable tally(const std::vector<PhantomItem>& items, bool all_classes) {
  if (items.empty()) throw data_error("defect table: empty collection");
  DefectTable table;
  const auto& classes = default_class_names();
  std::vector<std::size_t> codes;
  for (std::size_t c = 2; c < classes.size(); ++c) {
    codes.push_back(c);
    table.defect_names.push_back(classes[c]);
  }
  if (all_classes) {
    codes.push_back(1);
    table.defect_names.push_back(classes[1]);
    codes.push_back(0);
    table.defect_names.push_back(classes[0]);
  }
  for (const auto& item : items) {
    table.item_ids.push_back(item.id);
    std::vector<long long> sums(classes.size(), 0);
    for (const auto& slice : item.slices) {
      const auto counts = label_counts(slice);
      if (counts.size() != classes.size())
        throw data_error("defect table: slice uses a non-default class map");
      for (std::size_t c = 0; c < counts.size(); ++c) sums[c] += counts[c];
    }
    for (std::size_t c : codes) table.counts.push_back(sums[c]);
  }
  return table;
}

}  // namespace

DefectTable build_defect_table(const std::vector<PhantomItem>& items) {
  return tally(items, false);
}

DefectTable build_label_table(const std::vector<PhantomItem>& items) {
  return tally(items, true);
}

}

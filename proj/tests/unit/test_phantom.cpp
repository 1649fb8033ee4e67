#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "tomosim/grid.hpp"
#include "tomosim/phantom.hpp"

using namespace tomosim;

namespace {

PhantomSpec busy_spec(std::uint64_t seed) {
  auto spec = default_phantom_spec();
  spec.grid_size = 128;
  spec.seed = seed;
  for (auto& d : spec.defects) d.count_min = std::max(d.count_min, 1);
  return spec;
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate_phantom(busy_spec(31));
  auto b = generate_phantom(busy_spec(31));
  auto c = generate_phantom(busy_spec(32));
  CHECK(a.image.values == b.image.values);
  CHECK(a.labels.codes == b.labels.codes);
  CHECK(a.image.values != c.image.values);
}

TEST_CASE("every pixel's attenuation agrees with its label") {
  auto spec = busy_spec(7);
  auto slice = generate_phantom(spec);
  slice.validate();

  std::vector<double> defect_att(6, -1.0);
  for (const auto& d : spec.defects)
    defect_att[static_cast<int>(d.label)] = spec.flesh_attenuation + d.attenuation_offset;

  const std::set<double> healthy = {spec.flesh_attenuation, spec.skin_attenuation,
                                    spec.core_attenuation};
  long long defect_pixels = 0;
  for (int y = 0; y < slice.image.height; ++y)
    for (int x = 0; x < slice.image.width; ++x) {
      const auto code = slice.labels.at(x, y);
      const double att = slice.image.at(x, y);
      if (code == 0) {
        CHECK(att == 0.0);
      } else if (code == 1) {
        CHECK(healthy.count(att) == 1);
      } else {
        ++defect_pixels;
        CHECK(att == doctest::Approx(defect_att[code]).epsilon(1e-12));
      }
    }
  CHECK(defect_pixels > 0);
}

TEST_CASE("the core, skin and flesh tissues all appear") {
  auto spec = default_phantom_spec();
  spec.grid_size = 96;
  spec.defects.clear();
  auto slice = generate_phantom(spec);
  long long core = 0, skin = 0, flesh = 0, outside = 0;
  for (double v : slice.image.values) {
    if (v == spec.core_attenuation) ++core;
    else if (v == spec.skin_attenuation) ++skin;
    else if (v == spec.flesh_attenuation) ++flesh;
    else if (v == 0.0) ++outside;
  }
  CHECK(core > 0);
  CHECK(skin > 0);
  CHECK(flesh > skin);
  CHECK(outside > 0);
  CHECK(core + skin + flesh + outside == 96 * 96);
}

TEST_CASE("label_counts tallies every pixel exactly once") {
  auto slice = generate_phantom(busy_spec(3));
  auto counts = label_counts(slice);
  REQUIRE(counts.size() == default_class_names().size());
  long long total = 0;
  for (auto c : counts) total += c;
  CHECK(total == 128LL * 128LL);
  // manual recount of one class as the oracle
  long long rot = 0;
  for (auto c : slice.labels.codes)
    if (c == static_cast<std::uint8_t>(LabelClass::rot)) ++rot;
  CHECK(counts[static_cast<int>(LabelClass::rot)] == rot);
}

TEST_CASE("spec validation rejects nonsense geometry") {
  auto spec = default_phantom_spec();
  spec.grid_size = 3;
  CHECK_THROWS_AS(spec.validate(), data_error);
  spec = default_phantom_spec();
  spec.outer_radius = 1.4;
  CHECK_THROWS_AS(spec.validate(), data_error);
  spec = default_phantom_spec();
  spec.defects[0].radius_min = 0.3;
  spec.defects[0].radius_max = 0.1;
  CHECK_THROWS_AS(spec.validate(), data_error);
}

TEST_CASE("spec files load, honouring defaults and overrides") {
  auto dir = std::filesystem::temp_directory_path() / "tomosim_phantom_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "spec.txt").string();
  std::ofstream(path) << "# comment line\n"
                         "grid_size=64\n"
                         "core_radius=0.2\n"
                         "defect.rot.count=1-2\n"
                         "defect.rot.radius=0.05-0.1\n"
                         "defect.rot.offset=-0.004\n";
  auto spec = load_phantom_spec(path);
  CHECK(spec.grid_size == 64);
  CHECK(spec.core_radius == 0.2);
  CHECK(spec.outer_radius == default_phantom_spec().outer_radius);
  REQUIRE(spec.defects.size() == 1);
  CHECK(spec.defects[0].label == LabelClass::rot);
  CHECK(spec.defects[0].count_min == 1);
  CHECK(spec.defects[0].count_max == 2);
  CHECK(spec.defects[0].attenuation_offset == -0.004);

  std::ofstream(path) << "grid_sizes=64\n";
  CHECK_THROWS_AS(load_phantom_spec(path), data_error);
  std::ofstream(path) << "grid_size=sixty\n";
  CHECK_THROWS_AS(load_phantom_spec(path), data_error);
  std::ofstream(path) << "defect.rust.count=1-2\n";
  CHECK_THROWS_AS(load_phantom_spec(path), data_error);
}

TEST_CASE("collections are deterministic and carry mixed defect burdens") {
  auto base = default_phantom_spec();
  base.grid_size = 64;
  auto items = generate_collection(base, 60, 2, 99);
  auto again = generate_collection(base, 60, 2, 99);
  REQUIRE(items.size() == 60);
  CHECK(items[0].id == "1");
  CHECK(items[59].id == "60");
  for (std::size_t i = 0; i < items.size(); ++i) {
    REQUIRE(items[i].slices.size() == 2);
    CHECK(items[i].slices[0].image.values == again[i].slices[0].image.values);
    CHECK(items[i].slices[1].labels.codes == again[i].slices[1].labels.codes);
  }

  auto table = build_defect_table(items);
  REQUIRE(table.item_ids.size() == 60);
  REQUIRE(table.defect_names == default_defect_names());
  int defect_free = 0, defective = 0;
  for (std::size_t i = 0; i < table.item_ids.size(); ++i) {
    long long row = 0;
    for (std::size_t j = 0; j < table.defect_names.size(); ++j) row += table.count(i, j);
    (row == 0 ? defect_free : defective) += 1;
  }
  // prevalence 0.35 per class leaves roughly 18% of items clean
  CHECK(defect_free >= 3);
  CHECK(defective >= 30);
}

TEST_CASE("defect tables are the per-item sums of slice label counts") {
  auto base = default_phantom_spec();
  base.grid_size = 64;
  auto items = generate_collection(base, 8, 3, 1234);
  auto table = build_defect_table(items);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::vector<long long> sums(default_class_names().size(), 0);
    for (const auto& slice : items[i].slices) {
      auto counts = label_counts(slice);
      for (std::size_t c = 0; c < counts.size(); ++c) sums[c] += counts[c];
    }
    for (std::size_t j = 0; j < table.defect_names.size(); ++j)
      CHECK(table.count(i, j) == sums[j + 2]);  // defect codes start at 2
  }
  auto full = build_label_table(items);
  CHECK(full.defect_names.size() == table.defect_names.size() + 2);
}

TEST_CASE("the shipped defect fixture regenerates from its recorded recipe") {
  auto items = generate_collection(default_phantom_spec(), 94, 4, 20260818ull);
  auto table = build_defect_table(items);
  auto shipped = read_defect_table(std::string(TOMOSIM_TEST_DATA) + "/synthetic_defects_94x4.csv",
                                   default_defect_names());
  REQUIRE(shipped.item_ids.size() == 94);
  CHECK(table.item_ids == shipped.item_ids);
  CHECK(table.defect_names == shipped.defect_names);
  CHECK(table.counts == shipped.counts);
}

}  // TEST_SUITE

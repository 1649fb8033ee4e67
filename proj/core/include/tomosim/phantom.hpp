#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomosim/grid.hpp"

// Labeled fruit-like phantoms: a skin ring and flesh disk around a
// star-shaped core, plus elliptical defect blobs painted in a fixed order.
// Attenuation is base tissue plus a per-class offset; every pixel carries
// exactly one label.

namespace tomosim {

struct DefectSpec {
  LabelClass label = LabelClass::browning;
  int count_min = 0;
  int count_max = 0;
  double radius_min = 0.02;  // fractions of the grid half-width
  double radius_max = 0.05;
  double attenuation_offset = 0.0;  // added to flesh attenuation
};

struct PhantomSpec {
  int grid_size = 256;
  double outer_radius = 0.88;     // fraction of the half-width
  double skin_thickness = 0.04;   // fraction of the outer radius
  double flesh_attenuation = 0.019;
  double skin_attenuation = 0.026;
  double core_radius = 0.16;      // fraction of the half-width
  double core_attenuation = 0.014;
  std::vector<DefectSpec> defects;
  std::uint64_t seed = 0;

  void validate() const;
};

// the four stock defect classes with their default contrast offsets
PhantomSpec default_phantom_spec();

// key=value config file; unknown keys are errors
PhantomSpec load_phantom_spec(const std::string& path);

LabeledSlice generate_phantom(const PhantomSpec& spec);

struct PhantomItem {
  std::string id;
  std::vector<LabeledSlice> slices;
};

struct CollectionOptions {
  // probability that an item carries a given defect class at all; items
  // that dodge every class come out defect-free
  double prevalence = 0.35;
  // per-item defect burden multiplier range applied to the count bounds
  double burden_min = 0.5;
  double burden_max = 1.8;
};

std::vector<PhantomItem> generate_collection(const PhantomSpec& base, int n_items,
                                             int slices_per_item, std::uint64_t master_seed,
                                             const CollectionOptions& opts = {});

// per-class pixel tallies, indexed by label code
std::vector<long long> label_counts(const LabeledSlice& slice);

// item x defect pixel counts, summed over slices (defect classes only)
DefectTable build_defect_table(const std::vector<PhantomItem>& items);

// same, but with healthy and background columns appended
DefectTable build_label_table(const std::vector<PhantomItem>& items);

}

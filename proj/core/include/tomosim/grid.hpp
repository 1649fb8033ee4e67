#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomosim/errors.hpp"

// 2D grids, labeled slices, slice stacks and the on-disk container.
//
// Container format: "<name>.meta" is a text sidecar of key=value lines
// (width, height, dtype, order=row-major, endianness=little) and
// "<name>.raw" holds the flat little-endian payload. Grids whose values
// are all exactly representable in 32-bit floats are written as dtype=f32
// (4-byte samples); anything else is written as dtype=f64 so that a
// write/read round trip is always bit-exact. Label grids use dtype=u8 and
// carry their code-to-name map in the sidecar.

namespace tomosim {

struct Grid2D {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;
  std::vector<double> values;  // row-major, values[y * width + x]

  Grid2D() = default;
  Grid2D(int w, int h, double fill = 0.0, double px = 1.0);

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Grid2D& o) const { return width == o.width && height == o.height; }
  double physical_width() const { return width * pixel_size; }
};

// throws data_error if any value is NaN or infinite
void require_finite(const Grid2D& g, const std::string& what);

// path is the base name; ".meta" / ".raw" are appended (a trailing
// ".meta" or ".raw" on the argument is stripped first)
void write_grid(const Grid2D& g, const std::string& path);
Grid2D read_grid(const std::string& path);

// ---- labels ----------------------------------------------------------

enum class LabelClass : std::uint8_t {
  background = 0,
  healthy = 1,
  bitterpit = 2,
  holes = 3,
  rot = 4,
  browning = 5,
};

const std::vector<std::string>& default_class_names();
const std::vector<std::string>& default_defect_names();  // codes 2..5

struct LabelGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> codes;                // row-major class codes
  std::vector<std::string> class_names;           // index == code

  LabelGrid() = default;
  LabelGrid(int w, int h);
  std::uint8_t at(int x, int y) const { return codes[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return codes[static_cast<std::size_t>(y) * width + x]; }
};

struct LabeledSlice {
  Grid2D image;
  LabelGrid labels;
  void validate() const;  // shapes match, codes within the class map
};

void write_labels(const LabelGrid& labels, const std::string& path);
LabelGrid read_labels(const std::string& path);

// ---- stacks ----------------------------------------------------------

struct VolumeStack {
  std::vector<Grid2D> slices;  // identical shapes
  void validate() const;
};

// per-slice sum of values
std::vector<double> grey_value_profile(const VolumeStack& stack);

// drop `top` leading and `bottom` trailing slices
VolumeStack trim_stack(const VolumeStack& stack, int top, int bottom);

// indices whose profile entry falls below 1e-3 x the maximum entry
std::vector<int> empty_slice_indices(const std::vector<double>& profile);

// ---- defect count tables --------------------------------------------

struct DefectTable {
  std::vector<std::string> item_ids;
  std::vector<std::string> defect_names;
  std::vector<long long> counts;  // row-major item x defect

  long long count(std::size_t item, std::size_t defect) const {
    return counts[item * defect_names.size() + defect];
  }
};

// Reads "item_id,<col>,..." CSV, keeping only `defect_columns` (in that
// order). Extra columns are ignored; a missing requested column, negative,
// non-integer or duplicate rows are schema errors.
DefectTable read_defect_table(const std::string& path,
                              const std::vector<std::string>& defect_columns);
void write_defect_table(const DefectTable& table, const std::string& path);

}

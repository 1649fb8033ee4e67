#include "tomosim/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace tomosim {

Grid2D::Grid2D(int w, int h, double fill, double px)
    : width(w), height(h), pixel_size(px),
      values(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw data_error("grid dimensions must be non-negative");
  if (px <= 0.0) throw data_error("pixel size must be positive");
}

void require_finite(const Grid2D& g, const std::string& what) {
  for (double v : g.values)
    if (!std::isfinite(v)) throw data_error(what + ": non-finite sample");
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

std::string strip_container_suffix(const std::string& path) {
  for (const char* ext : {".meta", ".raw"}) {
    const std::size_t n = std::strlen(ext);
    if (path.size() > n && path.compare(path.size() - n, n, ext) == 0)
      return path.substr(0, path.size() - n);
  }
  return path;
}

bool fits_f32(const std::vector<double>& values) {
  for (double v : values)
    if (static_cast<double>(static_cast<float>(v)) != v) return false;
  return true;
}

template <typename T>
void append_le(std::string& out, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T read_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw data_error("short write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> parse_sidecar(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw data_error(path + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv,
                        const std::string& key, const std::string& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw data_error(path + ": missing key '" + key + "'");
  return it->second;
}

int parse_dim(const std::string& s, const std::string& path) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size() || v < 0) throw std::invalid_argument("");
    return static_cast<int>(v);
  } catch (...) {
    throw data_error(path + ": bad dimension '" + s + "'");
  }
}

}  // namespace

void write_grid(const Grid2D& g, const std::string& path) {
  require_finite(g, "write_grid");
  if (g.values.size() != static_cast<std::size_t>(g.width) * g.height)
    throw data_error("write_grid: value count does not match dimensions");

  const std::string base = strip_container_suffix(path);
  const bool f32 = fits_f32(g.values);

  std::string payload;
  payload.reserve(g.values.size() * (f32 ? 4 : 8));
  for (double v : g.values) {
    if (f32)
      append_le(payload, static_cast<float>(v));
    else
      append_le(payload, v);
  }

  std::ostringstream meta;
  meta << "width=" << g.width << "\n"
       << "height=" << g.height << "\n"
       << "dtype=" << (f32 ? "f32" : "f64") << "\n"
       << "order=row-major\n"
       << "endianness=little\n"
       << "pixel_size=" << std::hexfloat << g.pixel_size << "\n";

  write_file(base + ".meta", meta.str());
  write_file(base + ".raw", payload);
}

Grid2D read_grid(const std::string& path) {
  const std::string base = strip_container_suffix(path);
  const auto kv = parse_sidecar(base + ".meta");

  Grid2D g;
  g.width = parse_dim(need(kv, "width", base), base);
  g.height = parse_dim(need(kv, "height", base), base);
  const std::string dtype = need(kv, "dtype", base);
  if (need(kv, "order", base) != "row-major")
    throw data_error(base + ": unsupported order");
  if (need(kv, "endianness", base) != "little")
    throw data_error(base + ": unsupported endianness");
  if (auto it = kv.find("pixel_size"); it != kv.end()) {
    g.pixel_size = std::strtod(it->second.c_str(), nullptr);
    if (!(g.pixel_size > 0.0)) throw data_error(base + ": bad pixel_size");
  }

  const std::string payload = read_file(base + ".raw");
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  const std::size_t sample = dtype == "f32" ? 4 : dtype == "f64" ? 8 : 0;
  if (sample == 0) throw data_error(base + ": unsupported dtype '" + dtype + "'");
  if (payload.size() != n * sample)
    throw data_error(base + ": payload holds " + std::to_string(payload.size() / sample) +
                     " samples, header implies " + std::to_string(n));

  g.values.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n; ++i) {
    g.values[i] = sample == 4 ? static_cast<double>(read_le<float>(p + 4 * i))
                              : read_le<double>(p + 8 * i);
  }
  require_finite(g, base);
  return g;
}

// ---- labels ----------------------------------------------------------

const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {
      "background", "healthy", "bitterpit", "holes", "rot", "browning"};
  return names;
}

const std::vector<std::string>& default_defect_names() {
  static const std::vector<std::string> names = {"bitterpit", "holes", "rot", "browning"};
  return names;
}

LabelGrid::LabelGrid(int w, int h)
    : width(w), height(h), codes(static_cast<std::size_t>(w) * h, 0),
      class_names(default_class_names()) {
  if (w < 0 || h < 0) throw data_error("label grid dimensions must be non-negative");
}

void LabeledSlice::validate() const {
  if (image.width != labels.width || image.height != labels.height)
    throw data_error("labeled slice: image and label shapes differ");
  if (labels.class_names.empty()) throw data_error("labeled slice: empty class map");
  for (std::uint8_t c : labels.codes)
    if (c >= labels.class_names.size())
      throw data_error("labeled slice: code outside the class map");
}

void write_labels(const LabelGrid& labels, const std::string& path) {
  if (labels.codes.size() != static_cast<std::size_t>(labels.width) * labels.height)
    throw data_error("write_labels: code count does not match dimensions");
  for (std::uint8_t c : labels.codes)
    if (c >= labels.class_names.size())
      throw data_error("write_labels: code outside the class map");

  const std::string base = strip_container_suffix(path);
  std::ostringstream meta;
  meta << "width=" << labels.width << "\n"
       << "height=" << labels.height << "\n"
       << "dtype=u8\n"
       << "order=row-major\n"
       << "endianness=little\n"
       << "classes=";
  for (std::size_t i = 0; i < labels.class_names.size(); ++i)
    meta << (i ? "," : "") << i << ":" << labels.class_names[i];
  meta << "\n";
  write_file(base + ".meta", meta.str());
  write_file(base + ".raw",
             std::string(reinterpret_cast<const char*>(labels.codes.data()),
                         labels.codes.size()));
}

LabelGrid read_labels(const std::string& path) {
  const std::string base = strip_container_suffix(path);
  const auto kv = parse_sidecar(base + ".meta");

  LabelGrid g;
  g.width = parse_dim(need(kv, "width", base), base);
  g.height = parse_dim(need(kv, "height", base), base);
  if (need(kv, "dtype", base) != "u8") throw data_error(base + ": label dtype must be u8");

  g.class_names.clear();
  std::istringstream cls(need(kv, "classes", base));
  std::string entry;
  while (std::getline(cls, entry, ',')) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw data_error(base + ": malformed class entry");
    const int code = parse_dim(entry.substr(0, colon), base);
    if (code != static_cast<int>(g.class_names.size()))
      throw data_error(base + ": class codes must be consecutive from 0");
    g.class_names.push_back(entry.substr(colon + 1));
  }
  if (g.class_names.empty()) throw data_error(base + ": empty class map");

  const std::string payload = read_file(base + ".raw");
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
  if (payload.size() != n)
    throw data_error(base + ": payload holds " + std::to_string(payload.size()) +
                     " samples, header implies " + std::to_string(n));
  g.codes.assign(payload.begin(), payload.end());
  for (std::uint8_t c : g.codes)
    if (c >= g.class_names.size()) throw data_error(base + ": code outside the class map");
  return g;
}

// ---- stacks ----------------------------------------------------------

void VolumeStack::validate() const {
  for (const auto& s : slices)
    if (!s.same_shape(slices.front()))
      throw data_error("volume stack: slice shapes differ");
}

std::vector<double> grey_value_profile(const VolumeStack& stack) {
  stack.validate();
  std::vector<double> profile;
  profile.reserve(stack.slices.size());
  for (const auto& s : stack.slices) {
    double sum = 0.0;
    for (double v : s.values) sum += v;
    profile.push_back(sum);
  }
  return profile;
}

VolumeStack trim_stack(const VolumeStack& stack, int top, int bottom) {
  if (top < 0 || bottom < 0) throw data_error("trim_stack: negative trim count");
  const std::size_t n = stack.slices.size();
  if (static_cast<std::size_t>(top) + bottom > n)
    throw data_error("trim_stack: trim counts exceed stack size");
  VolumeStack out;
  out.slices.assign(stack.slices.begin() + top, stack.slices.end() - bottom);
  return out;
}

std::vector<int> empty_slice_indices(const std::vector<double>& profile) {
  double peak = 0.0;
  for (double v : profile) peak = std::max(peak, v);
  std::vector<int> idx;
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (profile[i] < 1e-3 * peak) idx.push_back(static_cast<int>(i));
  return idx;
}

// ---- defect count tables --------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    cells.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

long long parse_count(const std::string& s, const std::string& where) {
  if (s.empty()) throw data_error(where + ": empty count");
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (...) {
    throw data_error(where + ": count '" + s + "' is not an integer");
  }
  if (pos != s.size()) throw data_error(where + ": count '" + s + "' is not an integer");
  if (v < 0) throw data_error(where + ": negative count '" + s + "'");
  return v;
}

}  // namespace

DefectTable read_defect_table(const std::string& path,
                              const std::vector<std::string>& defect_columns) {
  if (defect_columns.empty()) throw data_error("read_defect_table: no columns requested");
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");

  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "item_id")
    throw data_error(path + ": first header column must be item_id");

  std::vector<std::size_t> column_of;
  for (const auto& want : defect_columns) {
    auto it = std::find(header.begin() + 1, header.end(), want);
    if (it == header.end())
      throw data_error(path + ": missing column '" + want + "'");
    column_of.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  DefectTable table;
  table.defect_names = defect_columns;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(row_no);
    if (cells.size() != header.size())
      throw data_error(where + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    if (std::find(table.item_ids.begin(), table.item_ids.end(), cells[0]) !=
        table.item_ids.end())
      throw data_error(where + ": duplicate item_id '" + cells[0] + "'");
    table.item_ids.push_back(cells[0]);
    for (std::size_t c : column_of) table.counts.push_back(parse_count(cells[c], where));
  }
  if (table.item_ids.empty()) throw data_error(path + ": no data rows");
  return table;
}

void write_defect_table(const DefectTable& table, const std::string& path) {
  if (table.counts.size() != table.item_ids.size() * table.defect_names.size())
    throw data_error("write_defect_table: count matrix shape mismatch");
  std::ostringstream out;
  out << "item_id";
  for (const auto& name : table.defect_names) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < table.item_ids.size(); ++i) {
    out << table.item_ids[i];
    for (std::size_t j = 0; j < table.defect_names.size(); ++j)
      out << "," << table.count(i, j);
    out << "\n";
  }
  write_file(path, out.str());
}

}

// tomosim: phantom generation, projection, degradation, reconstruction,
// dataset splitting and quality scoring, as one batch command per stage.
//
// Exit codes: 0 success, 2 usage error, 3 data or schema error,
// 4 solver limit reached (an incumbent or report is still written).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomosim/degrade.hpp"
#include "tomosim/errors.hpp"
#include "tomosim/grid.hpp"
#include "tomosim/metrics.hpp"
#include "tomosim/phantom.hpp"
#include "tomosim/projector.hpp"
#include "tomosim/recon.hpp"
#include "tomosim/rng.hpp"
#include "tomosim/split.hpp"
#include "tomosim/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tomosim;

namespace {

struct Common {
  std::string out = "out";
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency
};

void add_common_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Output root directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads, 0 for all cores")->capture_default_str();
}

// index pool over [0, count); file contents never depend on the worker count
void parallel_tasks(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string zero_pad(const char* prefix, int value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, value);
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& name, const json& body) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write manifest in " + dir.string());
  out << body.dump(2) << "\n";
}

json manifest_base(const std::string& command, const Common& c) {
  json m;
  m["command"] = command;
  m["tool_version"] = version_string;
  // jobs is deliberately absent: worker count never changes output bytes
  m["flags"]["out"] = c.out;
  m["flags"]["seed"] = c.seed;
  return m;
}

const std::vector<std::string> kDefectColumns = {"bitterpit", "holes", "rot", "browning"};

struct SliceRef {
  fs::path base;          // container path without extension
  std::string item_name;  // item_007
  int item_index = 0;     // 0-based
  int slice_index = 0;
  std::string suffix;     // part after the slice number, extensions stripped
};

// enumerate <root>/item_*/slice_*.meta in sorted order, skipping label files
std::vector<SliceRef> list_slices(const fs::path& root) {
  if (!fs::exists(root)) throw data_error("missing stage directory " + root.string());
  std::vector<SliceRef> refs;
  std::vector<fs::path> item_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && entry.path().filename().string().rfind("item_", 0) == 0)
      item_dirs.push_back(entry.path());
  std::sort(item_dirs.begin(), item_dirs.end());
  for (const auto& dir : item_dirs) {
    const std::string item_name = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("slice_", 0) == 0 && name.size() > 5 && name.ends_with(".meta") &&
          name.find("_labels") == std::string::npos)
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      SliceRef ref;
      std::string stem = f.stem().string();  // slice_012[_fbp]
      ref.base = f.parent_path() / stem;
      ref.item_name = item_name;
      ref.item_index = std::stoi(item_name.substr(5)) - 1;
      ref.slice_index = std::stoi(stem.substr(6, 3));
      if (stem.size() > 9) ref.suffix = stem.substr(9);
      refs.push_back(std::move(ref));
    }
  }
  if (refs.empty()) throw data_error("no slices found under " + root.string());
  return refs;
}

// ---- generate ----------------------------------------------------------

struct GenerateArgs {
  int items = 10;
  int slices = 4;
  int grid_size = 0;  // 0 = keep the spec value
  std::string spec_path;
};

int cmd_generate(const Common& c, const GenerateArgs& a) {
  PhantomSpec spec = a.spec_path.empty() ? default_phantom_spec() : load_phantom_spec(a.spec_path);
  if (a.grid_size > 0) spec.grid_size = a.grid_size;
  spec.validate();
  if (a.items < 1 || a.slices < 1) throw data_error("generate: items and slices must be positive");

  const auto collection = generate_collection(spec, a.items, a.slices, c.seed, {});
  const fs::path root = fs::path(c.out) / "phantoms";
  parallel_tasks(collection.size(), c.jobs, [&](std::size_t i) {
    const fs::path dir = root / zero_pad("item_", static_cast<int>(i) + 1);
    fs::create_directories(dir);
    for (std::size_t s = 0; s < collection[i].slices.size(); ++s) {
      const auto& slice = collection[i].slices[s];
      write_grid(slice.image, (dir / zero_pad("slice_", static_cast<int>(s))).string());
      write_labels(slice.labels,
                   (dir / (zero_pad("slice_", static_cast<int>(s)) + "_labels")).string());
    }
  });
  write_defect_table(build_defect_table(collection), (root / "defects.csv").string());

  json m = manifest_base("generate", c);
  m["flags"]["items"] = a.items;
  m["flags"]["slices"] = a.slices;
  m["flags"]["grid-size"] = a.grid_size;
  m["flags"]["spec"] = a.spec_path;
  m["grid_size"] = spec.grid_size;
  write_manifest(root, "manifest.json", m);
  return 0;
}

// ---- project -----------------------------------------------------------

struct ProjectArgs {
  int angles = 50;
  int upsample = 2;  // forward model refinement factor
};

int cmd_project(const Common& c, const ProjectArgs& a) {
  if (a.angles < 1 || a.upsample < 1) throw data_error("project: invalid angles or upsample");
  const auto slices = list_slices(fs::path(c.out) / "phantoms");
  const fs::path root = fs::path(c.out) / "sinograms" / "a";
  parallel_tasks(slices.size(), c.jobs, [&](std::size_t i) {
    const auto& ref = slices[i];
    const Grid2D image = read_grid(ref.base.string());
    const auto geometry = default_geometry(a.angles, image.width, image.pixel_size);
    const Grid2D fine = upsample_bilinear(image, a.upsample);
    const Sinogram sino = radon_forward(fine, geometry);
    const fs::path dir = root / ref.item_name;
    fs::create_directories(dir);
    write_sinogram(sino, (dir / zero_pad("slice_", ref.slice_index)).string());
  });

  json m = manifest_base("project", c);
  m["flags"]["angles"] = a.angles;
  m["flags"]["upsample"] = a.upsample;
  m["slices"] = slices.size();
  write_manifest(root, "manifest.json", m);
  return 0;
}

// ---- degrade -----------------------------------------------------------

struct DegradeArgs {
  double noise_fraction = 0.05;
  double alpha = 5.0;
  double i0 = 1.0;
  std::string kernel_table;
};

int cmd_degrade(const Common& c, const DegradeArgs& a) {
  if (a.noise_fraction < 0.0) throw data_error("degrade: negative noise fraction");
  if (a.alpha < 0.0) throw data_error("degrade: negative alpha");
  const auto slices = list_slices(fs::path(c.out) / "sinograms" / "a");

  if (a.noise_fraction > 0.0) {
    const fs::path root = fs::path(c.out) / "sinograms" / "b";
    const std::uint64_t stage_seed = derive_seed(c.seed, 101);
    parallel_tasks(slices.size(), c.jobs, [&](std::size_t i) {
      const auto& ref = slices[i];
      const Sinogram clean = read_sinogram(ref.base.string());
      const auto seed = derive_seed(stage_seed, static_cast<std::uint64_t>(ref.item_index),
                                    static_cast<std::uint64_t>(ref.slice_index));
      const Sinogram noisy = add_gaussian_noise(clean, a.noise_fraction, seed);
      const fs::path dir = root / ref.item_name;
      fs::create_directories(dir);
      write_sinogram(noisy, (dir / zero_pad("slice_", ref.slice_index)).string());
    });
    json m = manifest_base("degrade", c);
    m["flags"]["noise-fraction"] = a.noise_fraction;
    m["dataset"] = "b";
    write_manifest(root, "manifest.json", m);
  }

  if (a.alpha > 0.0) {
    const ScatterKernelTable table =
        a.kernel_table.empty() ? default_scatter_table() : read_scatter_table(a.kernel_table);
    table.validate();
    // group by item so the kept slice ranges see each item's stack size
    std::map<std::string, std::vector<const SliceRef*>> items;
    for (const auto& ref : slices) items[ref.item_name].push_back(&ref);
    std::vector<const SliceRef*> kept;
    for (const auto& [name, refs] : items) {
      const auto keep = dataset_c_slices(static_cast<int>(refs.size()));
      for (int idx : keep) kept.push_back(refs[static_cast<std::size_t>(idx)]);
    }
    const fs::path root = fs::path(c.out) / "sinograms" / "c";
    parallel_tasks(kept.size(), c.jobs, [&](std::size_t i) {
      const auto& ref = *kept[i];
      const Sinogram clean = read_sinogram(ref.base.string());
      const Sinogram scattered = apply_scatter(clean, table, a.alpha, a.i0);
      const fs::path dir = root / ref.item_name;
      fs::create_directories(dir);
      write_sinogram(scattered, (dir / zero_pad("slice_", ref.slice_index)).string());
    });
    json m = manifest_base("degrade", c);
    m["flags"]["alpha"] = a.alpha;
    m["flags"]["i0"] = a.i0;
    m["flags"]["kernel-table"] = a.kernel_table;
    m["dataset"] = "c";
    m["slices_kept"] = kept.size();
    write_manifest(root, "manifest.json", m);
  }
  return 0;
}

// ---- reconstruct -------------------------------------------------------

struct ReconstructArgs {
  std::string input = "a";  // sinogram set: a, b or c
  std::string method = "fbp";
  std::string sampling = "full";
  int iterations = 15;
  double cutoff = 1.0;
  int size = 0;  // 0 = round(fov width)
};

SamplingKind sampling_kind_of(const std::string& name) {
  if (name == "full") return SamplingKind::full;
  if (name == "s1") return SamplingKind::sampling1;
  if (name == "s2") return SamplingKind::sampling2;
  throw data_error("unknown sampling scheme '" + name + "'");
}

int cmd_reconstruct(const Common& c, const ReconstructArgs& a) {
  const auto slices = list_slices(fs::path(c.out) / "sinograms" / a.input);
  const SamplingKind kind = sampling_kind_of(a.sampling);
  const fs::path root = fs::path(c.out) / "recons" / a.sampling;

  std::atomic<double> wedge_deg{0.0};
  parallel_tasks(slices.size(), c.jobs, [&](std::size_t i) {
    const auto& ref = slices[i];
    Sinogram sino = read_sinogram(ref.base.string());
    if (kind != SamplingKind::full) {
      const auto scheme = make_sampling(kind, sino.geometry.angles);
      wedge_deg.store(missing_wedge_deg(scheme, sino.geometry.angles));
      sino = select_angles(sino, scheme);
    }
    ReconSettings settings;
    settings.iterations = a.iterations;
    settings.cutoff = a.cutoff;
    settings.output_size =
        a.size > 0 ? a.size : static_cast<int>(std::llround(sino.geometry.fov_width));
    Grid2D image;
    if (a.method == "fbp") {
      image = fbp(sino, settings);
    } else if (a.method == "cgls") {
      image = cgls(sino, settings).image;
    } else {
      throw data_error("unknown reconstruction method '" + a.method + "'");
    }
    const fs::path dir = root / ref.item_name;
    fs::create_directories(dir);
    write_grid(image, (dir / (zero_pad("slice_", ref.slice_index) + "_" + a.method)).string());
  });

  json m = manifest_base("reconstruct", c);
  m["flags"]["input"] = a.input;
  m["flags"]["method"] = a.method;
  m["flags"]["sampling"] = a.sampling;
  m["flags"]["iterations"] = a.iterations;
  m["flags"]["cutoff"] = a.cutoff;
  m["flags"]["size"] = a.size;
  if (kind != SamplingKind::full) m["missing_wedge_deg"] = wedge_deg.load();
  write_manifest(root, "manifest_" + a.method + ".json", m);
  return 0;
}

// ---- split -------------------------------------------------------------

struct SplitArgs {
  std::string table;
  std::vector<std::string> columns = kDefectColumns;
  double target = 0.2;
  std::vector<double> targets;
  int n = 20;
  long long samples = 10000;
  double tolerance = 0.005;
  std::string primary = "browning";
  double gap = 2.22e-8;
  long long node_limit = 1'000'000;
  bool drop_empty = false;
};

json split_result_json(const SplitResult& r, const PercentMatrix& m) {
  json body;
  body["method"] = r.method;
  body["subset_size"] = r.subset_size;
  body["targets"] = r.targets;
  body["achieved"] = r.achieved;
  body["objective"] = r.objective;
  json sel = json::array();
  for (std::size_t i = 0; i < m.items; ++i)
    if (r.selection[i]) sel.push_back(m.item_ids[i]);
  body["selected_items"] = sel;
  return body;
}

void write_selection_csv(const fs::path& path, const SplitResult& r, const PercentMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << "item_id,selected\n";
  for (std::size_t i = 0; i < m.items; ++i)
    out << m.item_ids[i] << "," << (r.selection[i] ? 1 : 0) << "\n";
}

PercentMatrix load_split_matrix(const SplitArgs& a, json& manifest) {
  DefectTable table = read_defect_table(a.table, a.columns);
  if (a.drop_empty) {
    // drop defect columns that never occur; their share targets are moot
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < table.defect_names.size(); ++j) {
      long long total = 0;
      for (std::size_t i = 0; i < table.item_ids.size(); ++i) total += table.count(i, j);
      if (total > 0) keep.push_back(j);
    }
    if (keep.size() != table.defect_names.size()) {
      DefectTable reduced;
      reduced.item_ids = table.item_ids;
      for (std::size_t j : keep) reduced.defect_names.push_back(table.defect_names[j]);
      for (std::size_t i = 0; i < table.item_ids.size(); ++i)
        for (std::size_t j : keep) reduced.counts.push_back(table.count(i, j));
      json dropped = json::array();
      for (std::size_t j = 0; j < table.defect_names.size(); ++j)
        if (std::find(keep.begin(), keep.end(), j) == keep.end())
          dropped.push_back(table.defect_names[j]);
      manifest["dropped_columns"] = dropped;
      table = std::move(reduced);
    }
  }
  return normalize_table(table);
}

int cmd_split_empirical(const Common& c, const SplitArgs& a) {
  json m = manifest_base("split empirical", c);
  const PercentMatrix matrix = load_split_matrix(a, m);
  EmpiricalOptions opts;
  opts.samples = a.samples;
  opts.tolerance = a.tolerance;
  opts.primary_defect = a.primary;
  opts.seed = c.seed;
  const auto outcome = empirical_split(matrix, a.target, a.n, opts);

  const fs::path dir = fs::path(c.out) / "splits";
  fs::create_directories(dir);
  m["flags"]["table"] = a.table;
  m["flags"]["target"] = a.target;
  m["flags"]["n"] = a.n;
  m["flags"]["samples"] = a.samples;
  m["flags"]["tolerance"] = a.tolerance;
  m["flags"]["primary"] = a.primary;
  m["successes"] = outcome.successes;
  m["samples"] = a.samples;
  if (outcome.best) {
    m["result"] = split_result_json(*outcome.best, matrix);
    write_selection_csv(dir / "empirical_selection.csv", *outcome.best, matrix);
  }
  write_manifest(dir, "empirical.json", m);
  if (!outcome.best) {
    std::fprintf(stderr, "split empirical: no candidate met the tolerance in %lld samples\n",
                 static_cast<long long>(a.samples));
    return 4;
  }
  return 0;
}

int cmd_split_miqp(const Common& c, const SplitArgs& a) {
  json m = manifest_base("split miqp", c);
  const PercentMatrix matrix = load_split_matrix(a, m);
  std::vector<double> targets = a.targets;
  if (targets.empty()) targets.assign(matrix.defects, a.target);
  if (targets.size() == 1) targets.assign(matrix.defects, targets.front());
  MiqpOptions opts;
  opts.gap = a.gap;
  opts.node_limit = a.node_limit;
  const auto result = miqp_split(matrix, targets, a.n, opts);

  const fs::path dir = fs::path(c.out) / "splits";
  fs::create_directories(dir);
  m["flags"]["table"] = a.table;
  m["flags"]["targets"] = targets;
  m["flags"]["n"] = a.n;
  m["flags"]["gap"] = a.gap;
  m["flags"]["node-limit"] = a.node_limit;
  m["result"] = split_result_json(result, matrix);
  m["result"]["lower_bound"] = result.lower_bound;
  m["result"]["certified_gap"] = result.certified_gap;
  m["result"]["nodes"] = result.nodes;
  m["result"]["hit_node_limit"] = result.hit_node_limit;
  write_selection_csv(dir / "miqp_selection.csv", result, matrix);
  write_manifest(dir, "miqp.json", m);
  if (result.hit_node_limit) {
    std::fprintf(stderr, "split miqp: node limit reached, incumbent written (certified gap %g)\n",
                 result.certified_gap);
    return 4;
  }
  return 0;
}

// ---- evaluate ----------------------------------------------------------

struct EvaluateArgs {
  std::string recon;
  std::string truth;
  std::string report;
};

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

int cmd_evaluate(const Common& c, const EvaluateArgs& a) {
  const fs::path recon_root = a.recon.empty() ? fs::path(c.out) / "recons" / "full" : fs::path(a.recon);
  const fs::path truth_root = a.truth.empty() ? fs::path(c.out) / "phantoms" : fs::path(a.truth);
  const auto refs = list_slices(recon_root);

  struct Row {
    std::string item;
    int slice;
    std::string suffix;
    double psnr, ssim;
  };
  std::vector<Row> rows(refs.size());
  parallel_tasks(refs.size(), c.jobs, [&](std::size_t i) {
    const auto& ref = refs[i];
    const Grid2D recon = read_grid(ref.base.string());
    const fs::path truth_base = truth_root / ref.item_name / zero_pad("slice_", ref.slice_index);
    const Grid2D truth = read_grid(truth_base.string());
    const auto report = quality(truth, recon);
    rows[i] = {ref.item_name, ref.slice_index, ref.suffix, report.psnr, report.ssim};
  });

  const fs::path report_path =
      a.report.empty() ? fs::path(c.out) / "reports" / "report.csv" : fs::path(a.report);
  fs::create_directories(report_path.parent_path().empty() ? "." : report_path.parent_path());
  std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + report_path.string());
  out << "item,slice,psnr,ssim\n";
  double mean_p = 0, mean_s = 0;
  for (const auto& r : rows) {
    out << r.item << (r.suffix.empty() ? "" : r.suffix) << "," << r.slice << ","
        << format_metric(r.psnr) << "," << format_metric(r.ssim) << "\n";
    mean_p += r.psnr;
    mean_s += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  mean_p /= n;
  mean_s /= n;
  double var_p = 0, var_s = 0;
  for (const auto& r : rows) {
    var_p += (r.psnr - mean_p) * (r.psnr - mean_p);
    var_s += (r.ssim - mean_s) * (r.ssim - mean_s);
  }
  out << "mean,," << format_metric(mean_p) << "," << format_metric(mean_s) << "\n";
  out << "std,," << format_metric(std::sqrt(var_p / n)) << "," << format_metric(std::sqrt(var_s / n))
      << "\n";
  out.close();

  json m = manifest_base("evaluate", c);
  m["flags"]["recon"] = recon_root.string();
  m["flags"]["truth"] = truth_root.string();
  m["flags"]["report"] = report_path.string();
  m["slices"] = rows.size();
  write_manifest(report_path.parent_path(), "evaluate_manifest.json", m);
  return 0;
}

// ---- pipeline ----------------------------------------------------------

struct PipelineArgs {
  GenerateArgs gen;
  ProjectArgs proj;
  DegradeArgs degrade;
  std::string sampling = "s1";
  std::string method = "fbp";
  int iterations = 15;
  double split_target = 0.2;
  int split_n = 0;  // 0 = items / 5, at least 1
  double gap = 2.22e-8;
};

int cmd_pipeline(const Common& c, const PipelineArgs& a) {
  int rc = cmd_generate(c, a.gen);
  if (rc != 0) return rc;
  rc = cmd_project(c, a.proj);
  if (rc != 0) return rc;
  rc = cmd_degrade(c, a.degrade);
  if (rc != 0) return rc;

  ReconstructArgs recon;
  recon.input = a.degrade.noise_fraction > 0.0 ? "b" : "a";
  recon.method = a.method;
  recon.iterations = a.iterations;
  recon.sampling = "full";
  rc = cmd_reconstruct(c, recon);
  if (rc != 0) return rc;
  if (a.sampling != "full") {
    recon.sampling = a.sampling;
    rc = cmd_reconstruct(c, recon);
    if (rc != 0) return rc;
  }

  SplitArgs split;
  split.table = (fs::path(c.out) / "phantoms" / "defects.csv").string();
  split.target = a.split_target;
  split.n = a.split_n > 0 ? a.split_n : std::max(1, a.gen.items / 5);
  split.gap = a.gap;
  split.drop_empty = true;
  rc = cmd_split_miqp(c, split);
  if (rc != 0) return rc;

  EvaluateArgs eval;
  eval.recon = (fs::path(c.out) / "recons" / a.sampling).string();
  rc = cmd_evaluate(c, eval);
  if (rc != 0) return rc;

  json m = manifest_base("pipeline", c);
  m["flags"]["items"] = a.gen.items;
  m["flags"]["slices"] = a.gen.slices;
  m["flags"]["grid-size"] = a.gen.grid_size;
  m["flags"]["spec"] = a.gen.spec_path;
  m["flags"]["angles"] = a.proj.angles;
  m["flags"]["upsample"] = a.proj.upsample;
  m["flags"]["noise-fraction"] = a.degrade.noise_fraction;
  m["flags"]["alpha"] = a.degrade.alpha;
  m["flags"]["sampling"] = a.sampling;
  m["flags"]["method"] = a.method;
  m["flags"]["iterations"] = a.iterations;
  m["flags"]["split-target"] = a.split_target;
  m["flags"]["split-n"] = a.split_n;
  m["flags"]["gap"] = a.gap;
  write_manifest(fs::path(c.out) / "reports", "pipeline_manifest.json", m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulated parallel-beam CT pipeline: phantoms, sinograms, degradation, "
               "reconstruction, dataset splits and quality reports"};
  app.require_subcommand(1);

  Common common;
  GenerateArgs gen_args;
  ProjectArgs proj_args;
  DegradeArgs degrade_args;
  ReconstructArgs recon_args;
  SplitArgs split_args;
  EvaluateArgs eval_args;
  PipelineArgs pipe_args;

  auto* gen = app.add_subcommand("generate", "Generate a labeled phantom collection");
  add_common_flags(gen, common);
  gen->add_option("--items", gen_args.items, "Items in the collection")->capture_default_str();
  gen->add_option("--slices", gen_args.slices, "Slices per item")->capture_default_str();
  gen->add_option("--grid-size", gen_args.grid_size, "Override the phantom grid size");
  gen->add_option("--spec", gen_args.spec_path, "Phantom spec file (key=value)");

  auto* proj = app.add_subcommand("project", "Forward project phantoms to sinograms");
  add_common_flags(proj, common);
  proj->add_option("--angles", proj_args.angles, "Projection angles")->capture_default_str();
  proj->add_option("--upsample", proj_args.upsample, "Forward model refinement factor")
      ->capture_default_str();

  auto* deg = app.add_subcommand("degrade", "Add noise and scatter to clean sinograms");
  add_common_flags(deg, common);
  deg->add_option("--noise-fraction", degrade_args.noise_fraction,
                  "Gaussian noise std as a fraction of the data mean")
      ->capture_default_str();
  deg->add_option("--alpha", degrade_args.alpha, "Scatter strength")->capture_default_str();
  deg->add_option("--i0", degrade_args.i0, "Open beam intensity")->capture_default_str();
  deg->add_option("--kernel-table", degrade_args.kernel_table, "Scatter kernel CSV");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct sinograms");
  add_common_flags(rec, common);
  rec->add_option("--input", recon_args.input, "Sinogram set: a, b or c")
      ->check(CLI::IsMember({"a", "b", "c"}))
      ->capture_default_str();
  rec->add_option("--method", recon_args.method, "fbp or cgls")
      ->check(CLI::IsMember({"fbp", "cgls"}))
      ->capture_default_str();
  rec->add_option("--sampling", recon_args.sampling, "full, s1 or s2")
      ->check(CLI::IsMember({"full", "s1", "s2"}))
      ->capture_default_str();
  rec->add_option("--iterations", recon_args.iterations, "CGLS iterations")->capture_default_str();
  rec->add_option("--cutoff", recon_args.cutoff, "Ramp filter cutoff (0, 1]")
      ->capture_default_str();
  rec->add_option("--size", recon_args.size, "Output image size, 0 = from geometry");

  auto* split = app.add_subcommand("split", "Label-balanced dataset splitting");
  split->require_subcommand(1);
  auto* split_emp = split->add_subcommand("empirical", "Random subset sampling");
  auto* split_miqp = split->add_subcommand("miqp", "Exact branch-and-bound subset");
  for (CLI::App* cmd : {split_emp, split_miqp}) {
    add_common_flags(cmd, common);
    cmd->add_option("--table", split_args.table, "Defect table CSV")->required();
    cmd->add_option("--columns", split_args.columns, "Defect column names")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--n", split_args.n, "Subset size")->capture_default_str();
  }
  split_emp->add_option("--target", split_args.target, "Primary defect share target")
      ->capture_default_str();
  split_emp->add_option("--samples", split_args.samples, "Random subsets to draw")
      ->capture_default_str();
  split_emp->add_option("--tolerance", split_args.tolerance, "Success band around the target")
      ->capture_default_str();
  split_emp->add_option("--primary", split_args.primary, "Defect the success test applies to")
      ->capture_default_str();
  split_miqp->add_option("--targets", split_args.targets,
                         "Per-defect share targets (single value broadcasts)")
      ->delimiter(',');
  split_miqp->add_option("--target", split_args.target, "Uniform share target")
      ->capture_default_str();
  split_miqp->add_option("--gap", split_args.gap, "Certified optimality gap")
      ->capture_default_str();
  split_miqp->add_option("--node-limit", split_args.node_limit, "Branch-and-bound node budget")
      ->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Score reconstructions against phantoms");
  add_common_flags(eval, common);
  eval->add_option("--recon", eval_args.recon, "Reconstruction directory");
  eval->add_option("--truth", eval_args.truth, "Ground truth directory");
  eval->add_option("--report", eval_args.report, "Report CSV path");

  auto* pipe = app.add_subcommand("pipeline", "Run every stage in order");
  add_common_flags(pipe, common);
  pipe->add_option("--items", pipe_args.gen.items, "Items in the collection")
      ->capture_default_str();
  pipe->add_option("--slices", pipe_args.gen.slices, "Slices per item")->capture_default_str();
  pipe->add_option("--grid-size", pipe_args.gen.grid_size, "Override the phantom grid size");
  pipe->add_option("--spec", pipe_args.gen.spec_path, "Phantom spec file");
  pipe->add_option("--angles", pipe_args.proj.angles, "Projection angles")->capture_default_str();
  pipe->add_option("--upsample", pipe_args.proj.upsample, "Forward model refinement factor")
      ->capture_default_str();
  pipe->add_option("--noise-fraction", pipe_args.degrade.noise_fraction, "Gaussian noise level")
      ->capture_default_str();
  pipe->add_option("--alpha", pipe_args.degrade.alpha, "Scatter strength")->capture_default_str();
  pipe->add_option("--sampling", pipe_args.sampling, "Reconstruction sampling: full, s1 or s2")
      ->check(CLI::IsMember({"full", "s1", "s2"}))
      ->capture_default_str();
  pipe->add_option("--method", pipe_args.method, "fbp or cgls")
      ->check(CLI::IsMember({"fbp", "cgls"}))
      ->capture_default_str();
  pipe->add_option("--iterations", pipe_args.iterations, "CGLS iterations")
      ->capture_default_str();
  pipe->add_option("--split-target", pipe_args.split_target, "Share target for the split")
      ->capture_default_str();
  pipe->add_option("--split-n", pipe_args.split_n, "Split subset size, 0 = items/5");
  pipe->add_option("--gap", pipe_args.gap, "Split certified gap")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(common, gen_args);
    if (proj->parsed()) return cmd_project(common, proj_args);
    if (deg->parsed()) return cmd_degrade(common, degrade_args);
    if (rec->parsed()) return cmd_reconstruct(common, recon_args);
    if (split_emp->parsed()) return cmd_split_empirical(common, split_args);
    if (split_miqp->parsed()) return cmd_split_miqp(common, split_args);
    if (eval->parsed()) return cmd_evaluate(common, eval_args);
    if (pipe->parsed()) return cmd_pipeline(common, pipe_args);
  } catch (const data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

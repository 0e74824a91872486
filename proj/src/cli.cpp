#include "c2g/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "c2g/augment.hpp"
#include "c2g/compress.hpp"
#include "c2g/container.hpp"
#include "c2g/csv.hpp"
#include "c2g/error.hpp"
#include "c2g/nn.hpp"
#include "c2g/preview.hpp"
#include "c2g/rng.hpp"
#include "c2g/synth.hpp"
#include "c2g/train.hpp"
#include "c2g/types.hpp"

namespace c2g {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UsageError, path.string() + ": " + e.what());
  }
}

/// Every subcommand logs its resolved configuration and seeds on stderr, so
/// any run can be reproduced from the log alone.
void log_resolved(const std::string& subcommand, json resolved) {
  resolved["subcommand"] = subcommand;
  std::cerr << json{{"resolved", resolved}}.dump() << '\n';
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& what) {
  if (!j.is_object()) throw Error(ErrorCode::UsageError, what + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw Error(ErrorCode::UsageError, what + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& field, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UsageError, what + ": bad value for '" + key + "': " + e.what());
  }
}

AugmentConfig augment_config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "translate_p",      "translate_max_dx",     "translate_max_dy", "reflect_p",
      "rotate_p",         "blackout_p",           "blackout_w",       "blackout_h",
      "shuffle_p",        "shuffle_count",        "shuffle_w",        "shuffle_h",
      "channel_brightness_p", "channel_factor_lo", "channel_factor_hi",
      "global_brightness_p",  "global_factor_lo",  "global_factor_hi",
      "delete_p",         "delete_count",         "rng_seed"};
  reject_unknown_keys(j, known, "augment config");
  AugmentConfig c;
  const std::string what = "augment config";
  read_key(j, "translate_p", c.translate_p, what);
  read_key(j, "translate_max_dx", c.translate_max_dx, what);
  read_key(j, "translate_max_dy", c.translate_max_dy, what);
  read_key(j, "reflect_p", c.reflect_p, what);
  read_key(j, "rotate_p", c.rotate_p, what);
  read_key(j, "blackout_p", c.blackout_p, what);
  read_key(j, "blackout_w", c.blackout_w, what);
  read_key(j, "blackout_h", c.blackout_h, what);
  read_key(j, "shuffle_p", c.shuffle_p, what);
  read_key(j, "shuffle_count", c.shuffle_count, what);
  read_key(j, "shuffle_w", c.shuffle_w, what);
  read_key(j, "shuffle_h", c.shuffle_h, what);
  read_key(j, "channel_brightness_p", c.channel_brightness_p, what);
  read_key(j, "channel_factor_lo", c.channel_factor_lo, what);
  read_key(j, "channel_factor_hi", c.channel_factor_hi, what);
  read_key(j, "global_brightness_p", c.global_brightness_p, what);
  read_key(j, "global_factor_lo", c.global_factor_lo, what);
  read_key(j, "global_factor_hi", c.global_factor_hi, what);
  read_key(j, "delete_p", c.delete_p, what);
  read_key(j, "delete_count", c.delete_count, what);
  read_key(j, "rng_seed", c.rng_seed, what);
  c.validate();
  return c;
}

json augment_config_to_json(const AugmentConfig& c) {
  return json{{"translate_p", c.translate_p},
              {"translate_max_dx", c.translate_max_dx},
              {"translate_max_dy", c.translate_max_dy},
              {"reflect_p", c.reflect_p},
              {"rotate_p", c.rotate_p},
              {"blackout_p", c.blackout_p},
              {"blackout_w", c.blackout_w},
              {"blackout_h", c.blackout_h},
              {"shuffle_p", c.shuffle_p},
              {"shuffle_count", c.shuffle_count},
              {"shuffle_w", c.shuffle_w},
              {"shuffle_h", c.shuffle_h},
              {"channel_brightness_p", c.channel_brightness_p},
              {"channel_factor_lo", c.channel_factor_lo},
              {"channel_factor_hi", c.channel_factor_hi},
              {"global_brightness_p", c.global_brightness_p},
              {"global_factor_lo", c.global_factor_lo},
              {"global_factor_hi", c.global_factor_hi},
              {"delete_p", c.delete_p},
              {"delete_count", c.delete_count},
              {"rng_seed", c.rng_seed}};
}

SynthSpec synth_preset(const std::string& name) {
  SynthSpec s;
  s.width_um = 672.0;
  s.height_um = 504.0;
  s.mean_objects = 672.0 * 504.0 / 81.6;
  s.channels = 6;
  Phenotype marker;
  marker.name = "marker_high";
  marker.mean = {10.0, 2.0, 2.0, 2.0, 2.0, 2.0};
  marker.spread = {2.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  Phenotype background;
  background.name = "background";
  background.mean = {2.0, 2.0, 2.0, 2.0, 2.0, 2.0};
  background.spread = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  s.phenotypes = {marker, background};
  if (name == "mixture") {
    s.mixtures[0] = {0.30, 0.70};
    s.mixtures[1] = {0.10, 0.90};
  } else if (name == "null") {
    s.mixtures[0] = {0.30, 0.70};
    s.mixtures[1] = {0.30, 0.70};
  } else {
    throw Error(ErrorCode::UsageError, "unknown preset '" + name + "' (use mixture or null)");
  }
  return s;
}

PatternSpec pattern_from_json(const json& j) {
  reject_unknown_keys(j, {"kind", "clusters", "radius_um"}, "pattern");
  PatternSpec p;
  std::string kind = "uniform";
  read_key(j, "kind", kind, "pattern");
  if (kind == "uniform") p.kind = PatternSpec::Kind::Uniform;
  else if (kind == "clustered") p.kind = PatternSpec::Kind::Clustered;
  else throw Error(ErrorCode::UsageError, "pattern kind must be uniform or clustered");
  read_key(j, "clusters", p.clusters, "pattern");
  read_key(j, "radius_um", p.radius_um, "pattern");
  return p;
}

void overlay_synth_config(SynthSpec& s, const json& j) {
  static const std::set<std::string> known = {"width_um",   "height_um", "mean_objects",
                                              "channels",   "seed",      "phenotypes",
                                              "mixtures",   "patterns"};
  reject_unknown_keys(j, known, "synth config");
  const std::string what = "synth config";
  read_key(j, "width_um", s.width_um, what);
  read_key(j, "height_um", s.height_um, what);
  read_key(j, "mean_objects", s.mean_objects, what);
  read_key(j, "channels", s.channels, what);
  read_key(j, "seed", s.seed, what);
  if (j.contains("phenotypes")) {
    s.phenotypes.clear();
    for (const auto& pj : j.at("phenotypes")) {
      reject_unknown_keys(pj, {"name", "mean", "spread"}, "phenotype");
      Phenotype ph;
      read_key(pj, "name", ph.name, what);
      read_key(pj, "mean", ph.mean, what);
      read_key(pj, "spread", ph.spread, what);
      s.phenotypes.push_back(std::move(ph));
    }
  }
  if (j.contains("mixtures")) {
    const auto& mj = j.at("mixtures");
    if (!mj.is_array() || mj.size() != 2) {
      throw Error(ErrorCode::UsageError, "synth config: mixtures must be an array of 2 arrays");
    }
    for (int k = 0; k < 2; ++k) {
      try {
        s.mixtures[static_cast<std::size_t>(k)] = mj.at(k).get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::UsageError, std::string("synth config: bad mixture: ") + e.what());
      }
    }
  }
  if (j.contains("patterns")) {
    const auto& pj = j.at("patterns");
    if (!pj.is_array() || pj.size() != 2) {
      throw Error(ErrorCode::UsageError, "synth config: patterns must be an array of 2 objects");
    }
    for (int k = 0; k < 2; ++k) {
      s.patterns[static_cast<std::size_t>(k)] = pattern_from_json(pj.at(k));
    }
  }
}

json synth_spec_to_json(const SynthSpec& s) {
  json phenos = json::array();
  for (const auto& ph : s.phenotypes) {
    phenos.push_back({{"name", ph.name}, {"mean", ph.mean}, {"spread", ph.spread}});
  }
  auto pattern_json = [](const PatternSpec& p) {
    json j{{"kind", p.kind == PatternSpec::Kind::Uniform ? "uniform" : "clustered"}};
    if (p.kind == PatternSpec::Kind::Clustered) {
      j["clusters"] = p.clusters;
      j["radius_um"] = p.radius_um;
    }
    return j;
  };
  return json{{"width_um", s.width_um},
              {"height_um", s.height_um},
              {"mean_objects", s.mean_objects},
              {"channels", s.channels},
              {"seed", s.seed},
              {"phenotypes", phenos},
              {"mixtures", {s.mixtures[0], s.mixtures[1]}},
              {"patterns", {pattern_json(s.patterns[0]), pattern_json(s.patterns[1])}}};
}

struct LoadedImages {
  std::vector<ObjectImage> images;
  std::vector<fs::path> sources;
};

/// Inputs come either from explicit CSV paths or from a directory holding a
/// synth manifest.json (preferred) or plain CSV files.
LoadedImages load_inputs(const std::vector<std::string>& csv_paths, const std::string& data_dir,
                         RowPolicy policy) {
  LoadedImages out;
  std::vector<fs::path> files;
  std::vector<std::optional<int>> manifest_labels;
  if (!data_dir.empty() && !csv_paths.empty()) {
    throw Error(ErrorCode::UsageError, "give either CSV paths or --data, not both");
  }
  if (!data_dir.empty()) {
    const fs::path dir(data_dir);
    if (!fs::is_directory(dir)) {
      throw Error(ErrorCode::IoError, data_dir + " is not a directory");
    }
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
      const json m = read_json_file(manifest);
      if (!m.contains("images") || !m.at("images").is_array()) {
        throw Error(ErrorCode::UsageError, manifest.string() + ": missing images array");
      }
      for (const auto& entry : m.at("images")) {
        reject_unknown_keys(entry, {"csv", "label"}, "manifest image entry");
        std::string rel;
        read_key(entry, "csv", rel, "manifest");
        if (rel.empty()) throw Error(ErrorCode::UsageError, "manifest entry without csv path");
        files.push_back(dir / rel);
        std::optional<int> label;
        if (entry.contains("label")) {
          int v = 0;
          read_key(entry, "label", v, "manifest");
          label = v;
        }
        manifest_labels.push_back(label);
      }
    } else {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
    }
  } else {
    for (const auto& p : csv_paths) files.emplace_back(p);
  }
  if (files.empty()) throw Error(ErrorCode::EmptyBatch, "no input CSV files");

  for (std::size_t i = 0; i < files.size(); ++i) {
    auto result = load_object_csv_with_sidecar(files[i], policy);
    if (i < manifest_labels.size() && manifest_labels[i]) {
      result.image.label = manifest_labels[i];
    }
    out.images.push_back(std::move(result.image));
    out.sources.push_back(files[i]);
  }
  return out;
}

Dataset to_labeled_dataset(std::vector<ObjectImage> images, std::optional<double> d, bool round,
                           BatchReport* report) {
  for (const auto& img : images) {
    if (!img.label) {
      throw Error(ErrorCode::EmptyDataset,
                  "image '" + img.id + "' has no label; train/eval need labeled data");
    }
  }
  auto compressed = compress_batch(images, d, round, report);
  Dataset ds;
  ds.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    Sample s;
    s.image = std::move(compressed[i]);
    s.label = *images[i].label;
    ds.push_back(std::move(s));
  }
  return ds;
}

std::array<std::uint32_t, 3> preview_channels(const C2GImage& img) {
  const std::uint32_t p = img.spec.channels;
  return {0u, std::min(1u, p - 1), std::min(2u, p - 1)};
}

json compression_report_json(const BatchReport& rep, const LoadedImages& loaded,
                             const std::vector<fs::path>* outputs, double seconds) {
  json images = json::array();
  for (std::size_t i = 0; i < rep.per_image.size(); ++i) {
    const auto& s = rep.per_image[i];
    json entry{{"input", loaded.sources[i].string()},
               {"id", loaded.images[i].id},
               {"objects_in", s.objects_in},
               {"kept_in_place", s.kept_in_place},
               {"shifted", s.shifted},
               {"deleted", s.deleted},
               {"conflict_nodes", s.conflict_nodes}};
    if (outputs) entry["output"] = (*outputs)[i].string();
    images.push_back(std::move(entry));
  }
  return json{{"d_um", rep.d_um},
              {"d_estimated", rep.d_estimated},
              {"images", images},
              {"totals", {{"kept", rep.total_kept}, {"deleted", rep.total_deleted}}},
              {"timing", {{"seconds", seconds}}}};
}

// ---------------------------------------------------------------------------
// subcommand implementations

struct CompressArgs {
  std::vector<std::string> csvs;
  std::string data_dir;
  std::string out_dir;
  std::string report_path;
  std::string preview_dir;
  std::optional<double> d;
  bool round = false;
  bool skip_bad_rows = false;
};

int cmd_estimate_grid(const CompressArgs& a) {
  const auto loaded = load_inputs(a.csvs, a.data_dir,
                                  a.skip_bad_rows ? RowPolicy::SkipBadRows : RowPolicy::Strict);
  for (const auto& img : loaded.images) img.validate();
  const double d = estimate_grid_spacing(BatchStats::from_images(loaded.images), a.round);
  log_resolved("estimate-grid",
               {{"inputs", loaded.sources.size()}, {"round", a.round}});
  std::cout << json{{"d_um", d}, {"images", loaded.sources.size()}, {"rounded", a.round}}.dump(2)
            << '\n';
  return 0;
}

int cmd_compress(const CompressArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto loaded = load_inputs(a.csvs, a.data_dir,
                                  a.skip_bad_rows ? RowPolicy::SkipBadRows : RowPolicy::Strict);
  BatchReport rep;
  const auto compressed = compress_batch(loaded.images, a.d, a.round, &rep);

  fs::create_directories(a.out_dir);
  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < compressed.size(); ++i) {
    const fs::path out = fs::path(a.out_dir) / (loaded.sources[i].stem().string() + ".c2g");
    write_c2g(compressed[i], out);
    outputs.push_back(out);
    if (!a.preview_dir.empty()) {
      fs::create_directories(a.preview_dir);
      export_preview(compressed[i], preview_channels(compressed[i]),
                     fs::path(a.preview_dir) / (loaded.sources[i].stem().string() + ".ppm"));
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json report = compression_report_json(rep, loaded, &outputs, seconds);
  if (!a.report_path.empty()) write_json_file(a.report_path, report);
  log_resolved("compress", {{"inputs", loaded.sources.size()},
                            {"d_um", rep.d_um},
                            {"d_estimated", rep.d_estimated},
                            {"round", a.round}});
  std::cout << report.dump(2) << '\n';
  return 0;
}

struct AugmentArgs {
  std::string input;
  std::string output;
  std::string config_path;
  std::string preview_dir;
  std::uint64_t seed = 0;
  // flag overrides (flags beat the config file)
  std::optional<double> translate_p, reflect_p, rotate_p, blackout_p, shuffle_p;
  std::optional<double> channel_brightness_p, global_brightness_p, delete_p;
  std::optional<int> translate_max_dx, translate_max_dy;
  std::optional<std::uint32_t> blackout_w, blackout_h, shuffle_count, shuffle_w, shuffle_h;
  std::optional<std::uint32_t> delete_count;
  std::optional<double> channel_factor_lo, channel_factor_hi, global_factor_lo, global_factor_hi;
};

int cmd_augment(const AugmentArgs& a) {
  C2GImage img = read_c2g(a.input);
  AugmentConfig cfg;
  if (!a.config_path.empty()) cfg = augment_config_from_json(read_json_file(a.config_path));
  auto apply = [](auto& field, const auto& opt) {
    if (opt) field = *opt;
  };
  apply(cfg.translate_p, a.translate_p);
  apply(cfg.translate_max_dx, a.translate_max_dx);
  apply(cfg.translate_max_dy, a.translate_max_dy);
  apply(cfg.reflect_p, a.reflect_p);
  apply(cfg.rotate_p, a.rotate_p);
  apply(cfg.blackout_p, a.blackout_p);
  apply(cfg.blackout_w, a.blackout_w);
  apply(cfg.blackout_h, a.blackout_h);
  apply(cfg.shuffle_p, a.shuffle_p);
  apply(cfg.shuffle_count, a.shuffle_count);
  apply(cfg.shuffle_w, a.shuffle_w);
  apply(cfg.shuffle_h, a.shuffle_h);
  apply(cfg.channel_brightness_p, a.channel_brightness_p);
  apply(cfg.channel_factor_lo, a.channel_factor_lo);
  apply(cfg.channel_factor_hi, a.channel_factor_hi);
  apply(cfg.global_brightness_p, a.global_brightness_p);
  apply(cfg.global_factor_lo, a.global_factor_lo);
  apply(cfg.global_factor_hi, a.global_factor_hi);
  apply(cfg.delete_p, a.delete_p);
  apply(cfg.delete_count, a.delete_count);
  cfg.rng_seed = derive_seed(a.seed, "augment");
  cfg.validate();

  const C2GImage result = augment_seeded(img, cfg);
  if (!a.output.empty()) write_c2g(result, a.output);
  if (!a.preview_dir.empty()) {
    fs::create_directories(a.preview_dir);
    export_preview(img, preview_channels(img), fs::path(a.preview_dir) / "before.ppm");
    export_preview(result, preview_channels(result), fs::path(a.preview_dir) / "after.ppm");
  }
  log_resolved("augment", {{"seed", a.seed},
                           {"stage_seed", cfg.rng_seed},
                           {"config", augment_config_to_json(cfg)}});
  std::cout << json{{"input", a.input},
                    {"output", a.output},
                    {"occupied_before", img.occupied_count()},
                    {"occupied_after", result.occupied_count()}}
                   .dump(2)
            << '\n';
  return 0;
}

struct SynthArgs {
  std::string out_dir;
  std::string preset = "mixture";
  std::string config_path;
  std::uint32_t n_per_class = 200;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int cmd_synth(const SynthArgs& a) {
  SynthSpec spec = synth_preset(a.preset);
  bool config_has_seed = false;
  if (!a.config_path.empty()) {
    const json j = read_json_file(a.config_path);
    config_has_seed = j.contains("seed");
    overlay_synth_config(spec, j);
  }
  // --seed (or its default, when no config seed exists) fans out per stage
  if (a.seed_given || !config_has_seed) spec.seed = derive_seed(a.seed, "synth");
  spec.validate();

  const auto images = generate(spec, a.n_per_class);
  fs::create_directories(a.out_dir);
  std::vector<std::string> channel_names;
  for (std::uint32_t c = 0; c < spec.channels; ++c) {
    channel_names.push_back("ch" + std::to_string(c));
  }
  json manifest_images = json::array();
  for (const auto& img : images) {
    const std::string name = img.id + ".csv";
    write_object_csv(img, channel_names, fs::path(a.out_dir) / name);
    manifest_images.push_back({{"csv", name}, {"label", *img.label}});
  }
  write_json_file(fs::path(a.out_dir) / "manifest.json",
                  json{{"images", manifest_images}, {"spec", synth_spec_to_json(spec)}});
  log_resolved("synth", {{"seed", a.seed},
                         {"preset", a.preset},
                         {"n_per_class", a.n_per_class},
                         {"spec", synth_spec_to_json(spec)}});
  std::cout << json{{"out_dir", a.out_dir},
                    {"images", images.size()},
                    {"per_class", a.n_per_class}}
                   .dump(2)
            << '\n';
  return 0;
}

struct TrainArgs {
  std::string data_dir;
  std::string arch = "deeplnino";
  std::uint32_t deepcnet_l = 8;
  std::uint32_t deepcnet_k = 32;
  std::optional<double> d;
  bool round = false;
  std::optional<std::uint32_t> epochs;
  std::uint32_t batch_size = 32;
  std::uint32_t runs = 10;
  std::uint64_t seed = 0;
  double weight_ratio = 3.0;
  double train_fraction = 2.0 / 3.0;
  bool no_oversample = false;
  bool no_augment = false;
  std::string aug_config_path;
  double l1 = 1e-3;
  double rho = 0.95;
  double eps = 1e-6;
  double early_stop = -1.0;
  std::string checkpoint_out;
  std::string report_path;
};

NetworkSpec arch_spec(const TrainArgs& a, const GridSpec& grid) {
  NetworkSpec spec;
  if (a.arch == "deeplnino") {
    spec = build_deeplnino(grid.kx, grid.ky, grid.channels);
  } else if (a.arch == "deepcnet") {
    spec = build_deepcnet(a.deepcnet_l, a.deepcnet_k, grid.kx, grid.ky, grid.channels);
  } else {
    throw Error(ErrorCode::UsageError, "unknown architecture '" + a.arch + "'");
  }
  spec.l1_coefficient = a.l1;
  return spec;
}

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.epochs = a.epochs ? *a.epochs : (a.arch == "deepcnet" ? 400u : 1000u);
  cfg.batch_size = a.batch_size;
  cfg.class_weight_ratio = a.weight_ratio;
  cfg.oversample_minority = !a.no_oversample;
  cfg.train_fraction = a.train_fraction;
  cfg.runs = a.runs;
  cfg.seed = derive_seed(a.seed, "train");
  cfg.augment_enabled = !a.no_augment;
  if (!a.aug_config_path.empty()) {
    cfg.augment = augment_config_from_json(read_json_file(a.aug_config_path));
  }
  cfg.l1 = a.l1;
  cfg.adadelta_rho = a.rho;
  cfg.adadelta_eps = a.eps;
  cfg.early_stop_balacc = a.early_stop;
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const auto loaded = load_inputs({}, a.data_dir, RowPolicy::Strict);
  BatchReport rep;
  Dataset all = to_labeled_dataset(loaded.images, a.d, a.round, &rep);
  for (const auto& s : all) {
    if (!(s.image.spec == all.front().image.spec)) {
      throw Error(ErrorCode::ShapeMismatch, "compressed images disagree on grid size");
    }
  }
  const NetworkSpec spec = arch_spec(a, all.front().image.spec);
  const TrainConfig cfg = train_config(a);
  log_resolved("train",
               {{"seed", a.seed},
                {"train_seed", cfg.seed},
                {"arch", a.arch},
                {"d_um", rep.d_um},
                {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"runs", cfg.runs},
                {"class_weight_ratio", cfg.class_weight_ratio},
                {"train_fraction", cfg.train_fraction},
                {"oversample", cfg.oversample_minority},
                {"augment", cfg.augment_enabled},
                {"l1", cfg.l1},
                {"adadelta", {{"rho", cfg.adadelta_rho}, {"eps", cfg.adadelta_eps}}},
                {"early_stop_balacc", cfg.early_stop_balacc},
                {"augment_config", augment_config_to_json(cfg.augment)}});

  const RunReport report = repeat_runs(spec, all, cfg);

  std::size_t best = 0;
  for (std::size_t r = 1; r < report.runs.size(); ++r) {
    if (report.runs[r].final_balacc > report.runs[best].final_balacc) best = r;
  }
  if (!a.checkpoint_out.empty()) {
    save_checkpoint(a.checkpoint_out, report.runs[best].spec, report.runs[best].params);
  }

  const auto& grid = all.front().image.spec;
  char accbuf[64];
  std::snprintf(accbuf, sizeof accbuf, "%.3f (%.3f)", report.mean_balacc, report.std_balacc);
  char timebuf[64];
  std::snprintf(timebuf, sizeof timebuf, "%.1f s/run", report.mean_train_seconds);
  std::cout << "model      input         grid        params  balanced accuracy  training time\n";
  std::cout << (a.arch == "deepcnet" ? "DeepCNet " : "DeepLNiNo") << "  "
            << "c2g d=" << rep.d_um << "  " << grid.kx << "x" << grid.ky << "x" << grid.channels
            << "  " << spec.total_params() << "  " << accbuf << "  " << timebuf << "\n";

  if (!a.report_path.empty()) {
    json runs = json::array();
    json per_run_seconds = json::array();
    for (const auto& run : report.runs) {
      json epochs = json::array();
      for (const auto& st : run.epochs) {
        epochs.push_back({{"train_loss", st.train_loss}, {"val_balacc", st.val_balacc}});
      }
      runs.push_back({{"final_balacc", run.final_balacc},
                      {"best_balacc", run.best_balacc},
                      {"epochs_run", run.epochs_run},
                      {"epochs", epochs}});
      per_run_seconds.push_back(run.train_seconds);
    }
    write_json_file(a.report_path,
                    json{{"arch", a.arch},
                         {"grid", {{"kx", grid.kx}, {"ky", grid.ky}, {"channels", grid.channels}}},
                         {"d_um", rep.d_um},
                         {"params", spec.total_params()},
                         {"mean_balacc", report.mean_balacc},
                         {"std_balacc", report.std_balacc},
                         {"runs", runs},
                         {"timing",
                          {{"mean_train_seconds", report.mean_train_seconds},
                           {"per_run_seconds", per_run_seconds}}}});
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::optional<double> d;
  bool round = false;
  std::string report_path;
};

int cmd_eval(const EvalArgs& a) {
  const auto [spec, params] = load_checkpoint(a.checkpoint);
  const auto loaded = load_inputs({}, a.data_dir, RowPolicy::Strict);
  BatchReport rep;
  const Dataset data = to_labeled_dataset(loaded.images, a.d, a.round, &rep);
  const EvalResult res = evaluate(spec, params, data);
  log_resolved("eval", {{"checkpoint", a.checkpoint}, {"d_um", rep.d_um}});
  const auto& cm = res.confusion.counts;
  const json out{{"balanced_accuracy", res.balanced_accuracy},
                 {"confusion",
                  {{"tn", cm[0][0]}, {"fp", cm[0][1]}, {"fn", cm[1][0]}, {"tp", cm[1][1]}}},
                 {"samples", data.size()}};
  if (!a.report_path.empty()) write_json_file(a.report_path, out);
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct InspectArgs {
  std::string checkpoint;
  double threshold = 0.004;
  std::string csv_out;
  std::string heatmap_out;
};

int cmd_inspect(const InspectArgs& a) {
  const auto [spec, params] = load_checkpoint(a.checkpoint);
  const FilterInspection insp = inspect_first_layer(spec, params, a.threshold);
  if (!a.csv_out.empty()) write_inspection_csv(insp, a.csv_out);
  if (!a.heatmap_out.empty()) write_inspection_heatmap(insp, a.heatmap_out);
  log_resolved("inspect-weights", {{"checkpoint", a.checkpoint}, {"threshold", a.threshold}});
  std::cout << json{{"threshold", a.threshold},
                    {"filters", insp.weights.size()},
                    {"channels", insp.weights.empty() ? 0 : insp.weights[0].size()},
                    {"flagged", insp.flagged}}
                   .dump(2)
            << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Cell2Grid pipeline: compression, augmentation, training, inspection"};
  app.require_subcommand(1);

  CompressArgs est;
  auto* sc_est = app.add_subcommand("estimate-grid", "Estimate the grid spacing for a batch");
  sc_est->add_option("csvs", est.csvs, "object CSV files (with JSON sidecars)");
  sc_est->add_option("--data", est.data_dir, "directory with manifest.json or CSV files");
  sc_est->add_flag("--round", est.round, "round the spacing to whole micrometers");
  sc_est->add_flag("--skip-bad-rows", est.skip_bad_rows, "skip malformed CSV rows");

  CompressArgs cmp;
  auto* sc_cmp = app.add_subcommand("compress", "Compress object tables to grid images");
  sc_cmp->add_option("csvs", cmp.csvs, "object CSV files (with JSON sidecars)");
  sc_cmp->add_option("--data", cmp.data_dir, "directory with manifest.json or CSV files");
  sc_cmp->add_option("--out", cmp.out_dir, "output directory for .c2g files")->required();
  sc_cmp->add_option("--d", cmp.d, "grid spacing in micrometers (default: estimate)");
  sc_cmp->add_flag("--round", cmp.round, "round the estimated spacing to whole micrometers");
  sc_cmp->add_option("--report", cmp.report_path, "write the JSON report to this file");
  sc_cmp->add_option("--preview", cmp.preview_dir, "write PPM previews to this directory");
  sc_cmp->add_flag("--skip-bad-rows", cmp.skip_bad_rows, "skip malformed CSV rows");

  AugmentArgs aug;
  auto* sc_aug = app.add_subcommand("augment", "Apply the augmentation stack to a .c2g image");
  sc_aug->add_option("input", aug.input, "input .c2g file")->required();
  sc_aug->add_option("--out", aug.output, "output .c2g file");
  sc_aug->add_option("--seed", aug.seed, "global seed");
  sc_aug->add_option("--config", aug.config_path, "JSON augmentation config");
  sc_aug->add_option("--preview", aug.preview_dir, "directory for before/after PPM previews");
  sc_aug->add_option("--translate-p", aug.translate_p);
  sc_aug->add_option("--translate-max-dx", aug.translate_max_dx);
  sc_aug->add_option("--translate-max-dy", aug.translate_max_dy);
  sc_aug->add_option("--reflect-p", aug.reflect_p);
  sc_aug->add_option("--rotate-p", aug.rotate_p);
  sc_aug->add_option("--blackout-p", aug.blackout_p);
  sc_aug->add_option("--blackout-w", aug.blackout_w);
  sc_aug->add_option("--blackout-h", aug.blackout_h);
  sc_aug->add_option("--shuffle-p", aug.shuffle_p);
  sc_aug->add_option("--shuffle-count", aug.shuffle_count);
  sc_aug->add_option("--shuffle-w", aug.shuffle_w);
  sc_aug->add_option("--shuffle-h", aug.shuffle_h);
  sc_aug->add_option("--channel-brightness-p", aug.channel_brightness_p);
  sc_aug->add_option("--channel-factor-lo", aug.channel_factor_lo);
  sc_aug->add_option("--channel-factor-hi", aug.channel_factor_hi);
  sc_aug->add_option("--global-brightness-p", aug.global_brightness_p);
  sc_aug->add_option("--global-factor-lo", aug.global_factor_lo);
  sc_aug->add_option("--global-factor-hi", aug.global_factor_hi);
  sc_aug->add_option("--delete-p", aug.delete_p);
  sc_aug->add_option("--delete-count", aug.delete_count);

  SynthArgs syn;
  auto* sc_syn = app.add_subcommand("synth", "Generate labeled synthetic object tables");
  sc_syn->add_option("--out", syn.out_dir, "output directory")->required();
  sc_syn->add_option("--n-per-class", syn.n_per_class, "images per class");
  sc_syn->add_option("--preset", syn.preset, "mixture (separable) or null (no signal)");
  sc_syn->add_option("--config", syn.config_path, "JSON generator config");
  auto* syn_seed = sc_syn->add_option("--seed", syn.seed, "global seed");

  TrainArgs tr;
  auto* sc_tr = app.add_subcommand("train", "Train on a directory of labeled object tables");
  sc_tr->add_option("--data", tr.data_dir, "directory with manifest.json or CSV files")
      ->required();
  sc_tr->add_option("--arch", tr.arch, "deeplnino or deepcnet");
  sc_tr->add_option("--deepcnet-l", tr.deepcnet_l, "deepcnet stage count");
  sc_tr->add_option("--deepcnet-k", tr.deepcnet_k, "deepcnet growth factor");
  sc_tr->add_option("--d", tr.d, "grid spacing in micrometers (default: estimate)");
  sc_tr->add_flag("--round", tr.round, "round the estimated spacing");
  sc_tr->add_option("--epochs", tr.epochs, "epochs per run (default 1000, deepcnet 400)");
  sc_tr->add_option("--batch-size", tr.batch_size);
  sc_tr->add_option("--runs", tr.runs, "independent training runs");
  sc_tr->add_option("--seed", tr.seed, "global seed");
  sc_tr->add_option("--weight-ratio", tr.weight_ratio, "loss weight of class 1 vs class 0");
  sc_tr->add_option("--train-fraction", tr.train_fraction);
  sc_tr->add_flag("--no-oversample", tr.no_oversample);
  sc_tr->add_flag("--no-augment", tr.no_augment);
  sc_tr->add_option("--aug-config", tr.aug_config_path, "JSON augmentation config");
  sc_tr->add_option("--l1", tr.l1, "L1 coefficient on the first conv layer");
  sc_tr->add_option("--rho", tr.rho, "Adadelta decay");
  sc_tr->add_option("--eps", tr.eps, "Adadelta epsilon");
  sc_tr->add_option("--early-stop", tr.early_stop,
                    "stop a run once validation balanced accuracy reaches this");
  sc_tr->add_option("--out", tr.checkpoint_out, "write the best run's checkpoint here");
  sc_tr->add_option("--report", tr.report_path, "write the JSON report to this file");

  EvalArgs ev;
  auto* sc_ev = app.add_subcommand("eval", "Evaluate a checkpoint on labeled object tables");
  sc_ev->add_option("--checkpoint", ev.checkpoint)->required();
  sc_ev->add_option("--data", ev.data_dir)->required();
  sc_ev->add_option("--d", ev.d, "grid spacing in micrometers (default: estimate)");
  sc_ev->add_flag("--round", ev.round);
  sc_ev->add_option("--report", ev.report_path);

  InspectArgs ins;
  auto* sc_ins = app.add_subcommand("inspect-weights", "Export first-layer filter weights");
  sc_ins->add_option("--checkpoint", ins.checkpoint)->required();
  sc_ins->add_option("--threshold", ins.threshold, "flag filters with any weight above this");
  sc_ins->add_option("--csv", ins.csv_out, "write the filters x channels table as CSV");
  sc_ins->add_option("--heatmap", ins.heatmap_out, "write the weight heatmap as PPM");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("c2g");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    syn.seed_given = syn_seed->count() > 0;
    if (sc_est->parsed()) return cmd_estimate_grid(est);
    if (sc_cmp->parsed()) return cmd_compress(cmp);
    if (sc_aug->parsed()) return cmd_augment(aug);
    if (sc_syn->parsed()) return cmd_synth(syn);
    if (sc_tr->parsed()) return cmd_train(tr);
    if (sc_ev->parsed()) return cmd_eval(ev);
    if (sc_ins->parsed()) return cmd_inspect(ins);
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error",
                       {{"code", error_code_name(e.code())}, {"message", e.what()}}}}
                     .dump()
              << '\n';
    return e.code() == ErrorCode::UsageError ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"code", "InternalError"}, {"message", e.what()}}}}.dump()
              << '\n';
    return 4;
  }
}

}  // namespace c2g

#include "c2g/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "c2g/error.hpp"
#include "c2g/preview.hpp"

namespace c2g {

namespace {

void check_binary_labels(const Dataset& data) {
  for (const auto& s : data) {
    if (s.label != 0 && s.label != 1) {
      throw Error(ErrorCode::OutOfBounds, "labels must be 0 or 1");
    }
  }
}

std::array<std::size_t, 2> class_counts(const Dataset& data) {
  std::array<std::size_t, 2> n{0, 0};
  for (const auto& s : data) ++n[static_cast<std::size_t>(s.label)];
  return n;
}

void check_common_fields(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw Error(ErrorCode::UsageError, "batch size must be >= 1");
  if (!(cfg.class_weight_ratio > 0.0) || !std::isfinite(cfg.class_weight_ratio)) {
    throw Error(ErrorCode::UsageError, "class weight ratio must be positive");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw Error(ErrorCode::UsageError, "train fraction must be in (0,1)");
  }
  if (!(cfg.l1 >= 0.0) || !std::isfinite(cfg.l1)) {
    throw Error(ErrorCode::UsageError, "l1 coefficient must be finite and >= 0");
  }
  if (!(cfg.adadelta_rho > 0.0 && cfg.adadelta_rho < 1.0)) {
    throw Error(ErrorCode::UsageError, "adadelta rho must be in (0,1)");
  }
  if (!(cfg.adadelta_eps > 0.0)) throw Error(ErrorCode::UsageError, "adadelta eps must be positive");
  cfg.augment.validate();
}

void check_input_shapes(const NetworkSpec& spec, const Dataset& data, const char* which) {
  for (const auto& s : data) {
    if (s.image.spec.kx != spec.input_x || s.image.spec.ky != spec.input_y ||
        s.image.spec.channels != spec.input_c) {
      throw Error(ErrorCode::ShapeMismatch,
                  std::string(which) + " image does not match the network input plane");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::UsageError, "epochs must be >= 1");
  if (runs < 1) throw Error(ErrorCode::UsageError, "run count must be >= 1");
  check_common_fields(*this);
}

SplitResult stratified_split(const Dataset& all, double train_fraction, std::uint64_t seed) {
  if (all.empty()) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  check_binary_labels(all);
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::UsageError, "train fraction must be in (0,1)");
  }
  std::array<std::vector<std::size_t>, 2> byclass;
  for (std::size_t i = 0; i < all.size(); ++i) {
    byclass[static_cast<std::size_t>(all[i].label)].push_back(i);
  }
  if (byclass[0].empty() || byclass[1].empty()) {
    throw Error(ErrorCode::SplitDegenerate, "dataset contains a single class");
  }

  Rng rng(seed);
  SplitResult out;
  for (auto& idx : byclass) {
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    if (n < 2) {
      throw Error(ErrorCode::ClassWithTooFewSamples,
                  "a class needs at least 2 samples to appear in both splits");
    }
    std::size_t ntrain = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    ntrain = std::clamp<std::size_t>(ntrain, 1, n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      (j < ntrain ? out.train : out.val).push_back(all[idx[j]]);
    }
  }
  return out;
}

Dataset oversample(const Dataset& train, std::uint64_t seed) {
  check_binary_labels(train);
  const auto n = class_counts(train);
  if (n[0] == 0 || n[1] == 0) {
    throw Error(ErrorCode::ClassWithTooFewSamples, "oversampling needs both classes present");
  }
  Dataset out = train;
  Rng rng(seed);
  if (n[0] != n[1]) {
    const int minority = n[0] < n[1] ? 0 : 1;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (train[i].label == minority) pool.push_back(i);
    }
    const std::size_t deficit = std::max(n[0], n[1]) - std::min(n[0], n[1]);
    for (std::size_t i = 0; i < deficit; ++i) {
      out.push_back(train[pool[rng.bounded(pool.size())]]);
    }
  }
  rng.shuffle(out);
  return out;
}

EvalResult evaluate(const Network<float>& net, const ParamSet<float>& params,
                    const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate on an empty dataset");
  check_binary_labels(data);
  EvalResult res;
  typename Network<float>::Cache cache;
  for (const auto& s : data) {
    const auto probs = net.forward(s.image.data, params, false, nullptr, &cache);
    const int pred = probs[1] > probs[0] ? 1 : 0;
    ++res.confusion.counts[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)];
  }
  double recalls = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto row = res.confusion.counts[static_cast<std::size_t>(k)];
    const std::uint64_t total = row[0] + row[1];
    if (total == 0) {
      throw Error(ErrorCode::SplitDegenerate,
                  "balanced accuracy undefined: class " + std::to_string(k) + " absent");
    }
    recalls += static_cast<double>(row[static_cast<std::size_t>(k)]) / static_cast<double>(total);
  }
  res.balanced_accuracy = recalls / 2.0;
  return res;
}

EvalResult evaluate(const NetworkSpec& spec, const ParamSet<float>& params, const Dataset& data) {
  Network<float> net(spec);
  check_input_shapes(spec, data, "evaluation");
  return evaluate(net, params, data);
}

RunResult train_model(const NetworkSpec& spec, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg, std::uint64_t run_seed) {
  check_common_fields(cfg);  // epochs == 0 allowed here: untrained baseline
  check_binary_labels(train);
  check_binary_labels(val);
  Network<float> net(spec);
  check_input_shapes(spec, train, "training");
  check_input_shapes(spec, val, "validation");

  RunResult res;
  res.spec = spec;

  Rng init_rng(derive_seed(run_seed, "init"));
  res.params = net.init_params(init_rng);

  if (cfg.epochs == 0) {
    res.final_balacc = res.best_balacc = evaluate(net, res.params, val).balanced_accuracy;
    return res;
  }
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "cannot train on an empty dataset");

  Dataset working =
      cfg.oversample_minority ? oversample(train, derive_seed(run_seed, "oversample")) : train;
  const std::size_t n = working.size();
  const std::array<double, 2> weights{1.0, cfg.class_weight_ratio};

  auto state = AdadeltaState<float>::like(res.params, cfg.adadelta_rho, cfg.adadelta_eps);
  ParamSet<float> grads;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const std::uint64_t order_base = derive_seed(run_seed, "order");
  const std::uint64_t aug_base = derive_seed(run_seed, "augment");
  const std::uint64_t drop_base = derive_seed(run_seed, "dropout");

  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint32_t e = 0; e < cfg.epochs; ++e) {
    Rng order_rng(derive_seed(order_base, e));
    order_rng.shuffle(order);
    const std::uint64_t aug_epoch = derive_seed(aug_base, e);
    const std::uint64_t drop_epoch = derive_seed(drop_base, e);

    double loss_sum = 0.0;
    std::size_t nbatches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<LabeledExample<float>> examples;
      examples.reserve(stop - start);
      for (std::size_t pos = start; pos < stop; ++pos) {
        const Sample& s = working[order[pos]];
        LabeledExample<float> ex;
        ex.label = s.label;
        if (cfg.augment_enabled) {
          Rng aug_rng(derive_seed(aug_epoch, pos));
          ex.x = augment(s.image, cfg.augment, aug_rng).data;
        } else {
          ex.x = s.image.data;
        }
        examples.push_back(std::move(ex));
      }
      std::vector<const LabeledExample<float>*> batch;
      batch.reserve(examples.size());
      for (const auto& ex : examples) batch.push_back(&ex);
      const double loss = loss_and_grads(net, res.params, batch, weights, cfg.l1, true,
                                         derive_seed(drop_epoch, nbatches), grads);
      adadelta_step(res.params, grads, state);
      loss_sum += loss * static_cast<double>(batch.size());
      ++nbatches;
    }

    EpochStat stat;
    stat.train_loss = loss_sum / static_cast<double>(n);
    stat.val_balacc = evaluate(net, res.params, val).balanced_accuracy;
    res.epochs.push_back(stat);
    res.epochs_run = e + 1;
    res.final_balacc = stat.val_balacc;
    res.best_balacc = std::max(res.best_balacc, stat.val_balacc);
    if (cfg.early_stop_balacc >= 0.0 && stat.val_balacc >= cfg.early_stop_balacc) break;
  }
  const auto t1 = std::chrono::steady_clock::now();
  res.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  return res;
}

RunReport repeat_runs(const NetworkSpec& spec, const Dataset& all, const TrainConfig& cfg,
                      const std::vector<std::uint64_t>* run_seeds) {
  cfg.validate();
  if (run_seeds && run_seeds->size() != cfg.runs) {
    throw Error(ErrorCode::UsageError, "run seed override must supply one seed per run");
  }
  RunReport report;
  for (std::uint32_t r = 0; r < cfg.runs; ++r) {
    const std::uint64_t seed_r = run_seeds ? (*run_seeds)[r] : derive_seed(cfg.seed, r);
    const auto split = stratified_split(all, cfg.train_fraction, derive_seed(seed_r, "split"));
    report.runs.push_back(train_model(spec, split.train, split.val, cfg, seed_r));
  }
  double sum = 0.0, time_sum = 0.0;
  for (const auto& run : report.runs) {
    sum += run.final_balacc;
    time_sum += run.train_seconds;
  }
  const double nr = static_cast<double>(report.runs.size());
  report.mean_balacc = sum / nr;
  report.mean_train_seconds = time_sum / nr;
  if (report.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& run : report.runs) {
      const double d = run.final_balacc - report.mean_balacc;
      ss += d * d;
    }
    report.std_balacc = std::sqrt(ss / (nr - 1.0));
  }
  return report;
}

FilterInspection inspect_first_layer(const NetworkSpec& spec, const ParamSet<float>& params,
                                     double threshold) {
  spec.validate();
  if (spec.layers.empty() || spec.layers[0].kind != LayerKind::Conv ||
      spec.layers[0].kw != 1 || spec.layers[0].kh != 1) {
    throw Error(ErrorCode::ArchitectureMismatch, "first layer is not a 1x1 convolution");
  }
  if (!std::isfinite(threshold)) {
    throw Error(ErrorCode::UsageError, "threshold must be finite");
  }
  const std::uint32_t cin = spec.input_c;
  const std::uint32_t nf = spec.layers[0].units;
  if (params.layers.empty() ||
      params.layers[0].size() != static_cast<std::size_t>(cin) * nf + nf) {
    throw Error(ErrorCode::ShapeMismatch, "first layer parameters do not match the spec");
  }
  FilterInspection insp;
  insp.threshold = threshold;
  insp.weights.assign(nf, std::vector<float>(cin, 0.0f));
  for (std::uint32_t f = 0; f < nf; ++f) {
    bool above = false;
    for (std::uint32_t ci = 0; ci < cin; ++ci) {
      const float w = params.layers[0][static_cast<std::size_t>(ci) * nf + f];
      insp.weights[f][ci] = w;
      if (w > threshold) above = true;
    }
    if (above) insp.flagged.push_back(f);
  }
  return insp;
}

void write_inspection_csv(const FilterInspection& insp, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os.precision(9);
  for (const auto& row : insp.weights) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      os << row[c];
    }
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_inspection_heatmap(const FilterInspection& insp, const std::filesystem::path& path) {
  const std::size_t nf = insp.weights.size();
  const std::size_t cin = nf ? insp.weights[0].size() : 0;
  if (nf == 0 || cin == 0) throw Error(ErrorCode::ShapeMismatch, "empty weight table");
  float maxpos = 0.0f;
  for (const auto& row : insp.weights) {
    for (float w : row) maxpos = std::max(maxpos, w);
  }
  if (maxpos <= 0.0f) maxpos = 1.0f;

  constexpr std::size_t cell = 24;
  const std::size_t width = cin * cell, height = nf * cell;
  std::vector<std::uint8_t> rgb(width * height * 3);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const float w = insp.weights[f][ci];
      std::uint8_t r, g, b;
      if (w < 0.0f) {
        // all negative weights share one display color
        r = 70;
        g = 70;
        b = 110;
      } else {
        const float t = w / maxpos;
        r = 255;
        g = static_cast<std::uint8_t>(255.0f - 235.0f * t);
        b = static_cast<std::uint8_t>(255.0f - 235.0f * t);
      }
      for (std::size_t py = 0; py < cell; ++py) {
        for (std::size_t px = 0; px < cell; ++px) {
          const std::size_t o = ((f * cell + py) * width + ci * cell + px) * 3;
          rgb[o] = r;
          rgb[o + 1] = g;
          rgb[o + 2] = b;
        }
      }
    }
  }
  write_ppm(path, width, height, rgb);
}

}  // namespace c2g

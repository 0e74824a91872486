#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "c2g/augment.hpp"
#include "c2g/nn.hpp"
#include "c2g/types.hpp"

namespace c2g {

struct Sample {
  C2GImage image;
  int label = 0;
};

using Dataset = std::vector<Sample>;

struct TrainConfig {
  std::uint32_t epochs = 1000;
  std::uint32_t batch_size = 32;
  /// Loss weight of class 1 relative to class 0.
  double class_weight_ratio = 3.0;
  bool oversample_minority = true;
  double train_fraction = 2.0 / 3.0;  // remainder becomes the validation set
  std::uint32_t runs = 10;
  std::uint64_t seed = 0;
  bool augment_enabled = true;
  AugmentConfig augment;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  double l1 = 1e-3;
  /// Stop once validation balanced accuracy reaches this value (< 0 disables).
  double early_stop_balacc = -1.0;

  void validate() const;
};

struct SplitResult {
  Dataset train;
  Dataset val;
};

/// Shuffles within each class and splits so per-class proportions match the
/// whole set within one sample. Deterministic per seed.
SplitResult stratified_split(const Dataset& all, double train_fraction, std::uint64_t seed);

/// Appends uniform draws (with replacement) from the minority class until
/// class counts are equal, then shuffles the order.
Dataset oversample(const Dataset& train, std::uint64_t seed);

struct EpochStat {
  double train_loss = 0.0;
  double val_balacc = 0.0;
};

struct Confusion {
  // counts[true label][predicted label]
  std::array<std::array<std::uint64_t, 2>, 2> counts{};
};

struct EvalResult {
  double balanced_accuracy = 0.0;
  Confusion confusion;
};

struct RunResult {
  std::vector<EpochStat> epochs;
  std::uint32_t epochs_run = 0;
  double final_balacc = 0.0;
  double best_balacc = 0.0;
  double train_seconds = 0.0;  // wall clock around the epoch loop
  NetworkSpec spec;
  ParamSet<float> params;
};

/// One training run: per epoch every training sample is augmented with its
/// own derived seed stream, batched in a fresh shuffled order, and stepped
/// with Adadelta on the weighted L1-regularized cross entropy; validation
/// balanced accuracy is recorded each epoch. epochs == 0 is allowed and
/// returns the untrained network's metrics.
RunResult train_model(const NetworkSpec& spec, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg, std::uint64_t run_seed);

EvalResult evaluate(const Network<float>& net, const ParamSet<float>& params, const Dataset& data);
EvalResult evaluate(const NetworkSpec& spec, const ParamSet<float>& params, const Dataset& data);

struct RunReport {
  std::vector<RunResult> runs;
  double mean_balacc = 0.0;
  double std_balacc = 0.0;  // sample standard deviation; 0 for a single run
  double mean_train_seconds = 0.0;
};

/// cfg.runs independent runs, each with its own derived seed and its own
/// stratified split of `all`. run_seeds overrides the per-run seeds when
/// provided (must then hold cfg.runs entries).
RunReport repeat_runs(const NetworkSpec& spec, const Dataset& all, const TrainConfig& cfg,
                      const std::vector<std::uint64_t>* run_seeds = nullptr);

struct FilterInspection {
  std::vector<std::vector<float>> weights;  // [filter][input channel]
  std::vector<std::uint32_t> flagged;       // filters with any weight above threshold
  double threshold = 0.004;
};

/// Reads the first layer (must be a 1x1 conv) as a filters x channels weight
/// table and flags filters with at least one weight above the threshold.
FilterInspection inspect_first_layer(const NetworkSpec& spec, const ParamSet<float>& params,
                                     double threshold = 0.004);

void write_inspection_csv(const FilterInspection& insp, const std::filesystem::path& path);
/// Heatmap raster of the weight table; negative weights are binned to a
/// single display color.
void write_inspection_heatmap(const FilterInspection& insp, const std::filesystem::path& path);

}  // namespace c2g

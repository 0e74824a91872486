#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2g/error.hpp"
#include "c2g/nn.hpp"
#include "c2g/rng.hpp"
#include "c2g/train.hpp"
#include "c2g/types.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using namespace c2g;

namespace {

fs::path tmp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "c2g_test_train";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// 1x1 single-channel image carrying one value; used both as a sample id tag
// and to steer a fixed linear classifier.
Sample tagged_sample(float value, int label) {
  GridSpec gs;
  gs.d_um = 5.0;
  gs.kx = 1;
  gs.ky = 1;
  gs.channels = 1;
  Sample s;
  s.image = C2GImage::zeros(gs);
  s.image.data[0] = value;
  s.image.occupancy[0] = 1;
  s.label = label;
  return s;
}

Dataset tagged_dataset(std::size_t n0, std::size_t n1) {
  Dataset all;
  float id = 1.0f;
  for (std::size_t i = 0; i < n0; ++i) all.push_back(tagged_sample(id++, 0));
  for (std::size_t i = 0; i < n1; ++i) all.push_back(tagged_sample(id++, 1));
  return all;
}

std::multiset<float> ids_of(const Dataset& d) {
  std::multiset<float> out;
  for (const auto& s : d) out.insert(s.image.data[0]);
  return out;
}

std::array<std::size_t, 2> counts_of(const Dataset& d) {
  std::array<std::size_t, 2> n{0, 0};
  for (const auto& s : d) ++n[static_cast<std::size_t>(s.label)];
  return n;
}

// Net reading the single tagged value: logits (v, -v), so negative values
// predict class 1 and positive values class 0.
struct SignClassifier {
  NetworkSpec spec;
  ParamSet<float> params;
  SignClassifier() {
    spec.input_x = 1;
    spec.input_y = 1;
    spec.input_c = 1;
    spec.layers = {LayerSpec::flatten(), LayerSpec::softmax(2)};
    Network<float> net(spec);
    params = net.zero_params();
    params.layers[1] = {1.0f, -1.0f, 0.0f, 0.0f};
  }
};

// Small planted task: class decided by the mean of channel 0.
Sample planted_sample(Rng& rng, int label) {
  GridSpec gs;
  gs.d_um = 5.0;
  gs.kx = 6;
  gs.ky = 6;
  gs.channels = 2;
  Sample s;
  s.image = C2GImage::zeros(gs);
  s.label = label;
  for (std::uint32_t ix = 0; ix < 6; ++ix) {
    for (std::uint32_t iy = 0; iy < 6; ++iy) {
      if (rng.u01() < 0.4) continue;
      const double base = label == 1 ? 2.0 : 0.6;
      s.image.at(ix, iy, 0) = static_cast<float>(rng.uniform_real(0.5 * base, 1.5 * base));
      s.image.at(ix, iy, 1) = static_cast<float>(rng.uniform_real(0.2, 1.0));
      s.image.occupancy[s.image.node_index(ix, iy)] = 1;
    }
  }
  return s;
}

Dataset planted_dataset(std::size_t n0, std::size_t n1, std::uint64_t seed) {
  Rng rng(seed);
  Dataset all;
  for (std::size_t i = 0; i < n0; ++i) all.push_back(planted_sample(rng, 0));
  for (std::size_t i = 0; i < n1; ++i) all.push_back(planted_sample(rng, 1));
  return all;
}

NetworkSpec planted_net() {
  NetworkSpec spec;
  spec.input_x = 6;
  spec.input_y = 6;
  spec.input_c = 2;
  spec.layers = {LayerSpec::flatten(), LayerSpec::dense(8), LayerSpec::softmax(2)};
  return spec;
}

TrainConfig quiet_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.runs = 3;
  cfg.seed = 99;
  cfg.augment_enabled = false;
  cfg.l1 = 0.0;
  return cfg;
}

struct Ppm {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> rgb;
  std::array<std::uint8_t, 3> px(std::size_t x, std::size_t y) const {
    const std::size_t o = (y * width + x) * 3;
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

Ppm read_ppm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::string magic;
  is >> magic;
  REQUIRE(magic == "P6");
  Ppm out;
  std::size_t maxval = 0;
  is >> out.width >> out.height >> maxval;
  REQUIRE(maxval == 255);
  is.get();
  out.rgb.resize(out.width * out.height * 3);
  is.read(reinterpret_cast<char*>(out.rgb.data()), static_cast<std::streamsize>(out.rgb.size()));
  REQUIRE(is.gcount() == static_cast<std::streamsize>(out.rgb.size()));
  return out;
}

}  // namespace

TEST_CASE("stratified split reproduces the documented 36 plus 12 example") {
  const auto all = tagged_dataset(36, 12);
  const auto split = stratified_split(all, 2.0 / 3.0, 7);

  CHECK(split.train.size() == 32);
  CHECK(split.val.size() == 16);
  CHECK(counts_of(split.train) == std::array<std::size_t, 2>{24, 8});
  CHECK(counts_of(split.val) == std::array<std::size_t, 2>{12, 4});

  auto joined = ids_of(split.train);
  for (float id : ids_of(split.val)) joined.insert(id);
  CHECK(joined == ids_of(all));
}

TEST_CASE("stratified split keeps per-class proportions within one sample") {
  const auto all = tagged_dataset(17, 5);
  const double frac = 2.0 / 3.0;
  const auto split = stratified_split(all, frac, 3);
  const auto tc = counts_of(split.train);
  CHECK(std::abs(static_cast<double>(tc[0]) - frac * 17.0) <= 1.0);
  CHECK(std::abs(static_cast<double>(tc[1]) - frac * 5.0) <= 1.0);
  CHECK(tc[0] + counts_of(split.val)[0] == 17);
  CHECK(tc[1] + counts_of(split.val)[1] == 5);
}

TEST_CASE("stratified split determinism and error paths") {
  const auto all = tagged_dataset(9, 6);
  const auto a = stratified_split(all, 0.5, 42);
  const auto b = stratified_split(all, 0.5, 42);
  CHECK(ids_of(a.train) == ids_of(b.train));
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].image.data[0] == b.train[i].image.data[0]);
  }
  const auto c = stratified_split(all, 0.5, 43);
  bool same_order = a.train.size() == c.train.size();
  if (same_order) {
    same_order = std::equal(a.train.begin(), a.train.end(), c.train.begin(),
                            [](const Sample& x, const Sample& y) {
                              return x.image.data[0] == y.image.data[0];
                            });
  }
  CHECK(!same_order);

  CHECK_THROWS_AS(stratified_split(Dataset{}, 0.5, 1), Error);
  CHECK_THROWS_AS(stratified_split(all, 0.0, 1), Error);
  CHECK_THROWS_AS(stratified_split(all, 1.0, 1), Error);

  try {
    stratified_split(tagged_dataset(10, 0), 0.5, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SplitDegenerate);
  }
  try {
    stratified_split(tagged_dataset(10, 1), 0.5, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassWithTooFewSamples);
  }
}

TEST_CASE("oversampling equalizes counts without fabricating samples") {
  const auto train = tagged_dataset(24, 8);
  const auto over = oversample(train, 5);
  CHECK(over.size() == 48);
  CHECK(counts_of(over) == std::array<std::size_t, 2>{24, 24});

  const auto input_ids = ids_of(train);
  for (const auto& s : over) {
    CHECK(input_ids.count(s.image.data[0]) == 1);
  }
  // Originals all survive: oversampling only appends duplicates.
  const auto over_ids = ids_of(over);
  for (float id : input_ids) CHECK(over_ids.count(id) >= 1);

  const auto again = oversample(train, 5);
  CHECK(ids_of(again) == over_ids);
}

TEST_CASE("oversampling a balanced set only reorders it") {
  const auto train = tagged_dataset(6, 6);
  const auto over = oversample(train, 11);
  CHECK(over.size() == 12);
  CHECK(ids_of(over) == ids_of(train));

  CHECK_THROWS_AS(oversample(tagged_dataset(5, 0), 1), Error);
}

TEST_CASE("evaluate computes balanced accuracy from per-class recalls") {
  SignClassifier clf;

  SUBCASE("hand confusion matrix") {
    Dataset data;
    for (int i = 0; i < 3; ++i) data.push_back(tagged_sample(-1.0f, 1));
    data.push_back(tagged_sample(1.0f, 1));
    for (int i = 0; i < 10; ++i) data.push_back(tagged_sample(1.0f, 0));
    for (int i = 0; i < 2; ++i) data.push_back(tagged_sample(-1.0f, 0));

    const auto res = evaluate(clf.spec, clf.params, data);
    CHECK(res.confusion.counts[1][1] == 3);
    CHECK(res.confusion.counts[1][0] == 1);
    CHECK(res.confusion.counts[0][0] == 10);
    CHECK(res.confusion.counts[0][1] == 2);
    CHECK(res.balanced_accuracy == doctest::Approx(19.0 / 24.0).epsilon(1e-12));
  }
  SUBCASE("all correct") {
    Dataset data;
    for (int i = 0; i < 5; ++i) data.push_back(tagged_sample(1.0f, 0));
    for (int i = 0; i < 2; ++i) data.push_back(tagged_sample(-1.0f, 1));
    CHECK(evaluate(clf.spec, clf.params, data).balanced_accuracy == 1.0);
  }
  SUBCASE("all-majority predictions on a 36 to 12 set score one half") {
    Dataset data;
    for (int i = 0; i < 36; ++i) data.push_back(tagged_sample(1.0f, 0));
    for (int i = 0; i < 12; ++i) data.push_back(tagged_sample(1.0f, 1));
    CHECK(evaluate(clf.spec, clf.params, data).balanced_accuracy == 0.5);
  }
  SUBCASE("invariant to class imbalance at fixed recalls") {
    Dataset small, large;
    auto add = [](Dataset& d, int neg_right, int neg_wrong, int pos_right, int pos_wrong) {
      for (int i = 0; i < neg_right; ++i) d.push_back(tagged_sample(1.0f, 0));
      for (int i = 0; i < neg_wrong; ++i) d.push_back(tagged_sample(-1.0f, 0));
      for (int i = 0; i < pos_right; ++i) d.push_back(tagged_sample(-1.0f, 1));
      for (int i = 0; i < pos_wrong; ++i) d.push_back(tagged_sample(1.0f, 1));
    };
    add(small, 10, 2, 3, 1);
    add(large, 20, 4, 9, 3);
    CHECK(evaluate(clf.spec, clf.params, small).balanced_accuracy ==
          doctest::Approx(evaluate(clf.spec, clf.params, large).balanced_accuracy)
              .epsilon(1e-12));
  }
  SUBCASE("error paths") {
    CHECK_THROWS_AS(evaluate(clf.spec, clf.params, Dataset{}), Error);
    Dataset one_class;
    one_class.push_back(tagged_sample(1.0f, 0));
    try {
      evaluate(clf.spec, clf.params, one_class);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SplitDegenerate);
    }
  }
}

TEST_CASE("zero training epochs give the untrained baseline") {
  const auto all = planted_dataset(8, 8, 1);
  const auto split = stratified_split(all, 0.5, 2);
  auto cfg = quiet_config();
  cfg.epochs = 0;

  const auto res = train_model(planted_net(), split.train, split.val, cfg, 77);
  CHECK(res.epochs.empty());
  CHECK(res.epochs_run == 0);
  CHECK(res.final_balacc >= 0.0);
  CHECK(res.final_balacc <= 1.0);

  Network<float> net(planted_net());
  Rng init(derive_seed(77, "init"));
  const auto params = net.init_params(init);
  CHECK(res.params.layers == params.layers);
  CHECK(res.final_balacc == evaluate(net, params, split.val).balanced_accuracy);
}

TEST_CASE("loss decreases over ten epochs on a fixed batch") {
  const auto all = planted_dataset(6, 6, 21);
  auto cfg = quiet_config();
  cfg.epochs = 10;
  cfg.batch_size = 12;
  cfg.oversample_minority = false;
  cfg.augment_enabled = false;
  cfg.l1 = 0.0;

  const auto res = train_model(planted_net(), all, all, cfg, 5);
  REQUIRE(res.epochs.size() == 10);
  for (const auto& e : res.epochs) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(e.train_loss > 0.0);
  }
  CHECK(res.epochs.back().train_loss < res.epochs.front().train_loss);
  CHECK(res.train_seconds >= 0.0);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto all = planted_dataset(8, 6, 31);
  const auto split = stratified_split(all, 2.0 / 3.0, 4);
  auto cfg = quiet_config();
  cfg.epochs = 3;
  cfg.augment_enabled = true;

  const auto a = train_model(planted_net(), split.train, split.val, cfg, 123);
  const auto b = train_model(planted_net(), split.train, split.val, cfg, 123);
  CHECK(a.final_balacc == b.final_balacc);
  CHECK(a.params.layers == b.params.layers);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);
    CHECK(a.epochs[e].val_balacc == b.epochs[e].val_balacc);
  }

  const auto c = train_model(planted_net(), split.train, split.val, cfg, 124);
  CHECK(a.params.layers != c.params.layers);
}

TEST_CASE("early stopping ends the epoch loop at the threshold") {
  const auto all = planted_dataset(6, 6, 41);
  const auto split = stratified_split(all, 0.5, 8);
  auto cfg = quiet_config();
  cfg.epochs = 50;
  cfg.early_stop_balacc = 0.0;

  const auto res = train_model(planted_net(), split.train, split.val, cfg, 9);
  CHECK(res.epochs_run == 1);
  CHECK(res.epochs.size() == 1);
}

TEST_CASE("train model rejects mismatched image planes") {
  const auto all = planted_dataset(4, 4, 51);
  const auto split = stratified_split(all, 0.5, 12);
  NetworkSpec wrong = planted_net();
  wrong.input_x = 7;
  try {
    train_model(wrong, split.train, split.val, quiet_config(), 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("repeated runs aggregate mean and sample deviation") {
  const auto all = planted_dataset(8, 6, 61);
  auto cfg = quiet_config();
  cfg.runs = 3;

  const auto report = repeat_runs(planted_net(), all, cfg);
  REQUIRE(report.runs.size() == 3);
  double mean = 0.0;
  for (const auto& run : report.runs) {
    CHECK(run.final_balacc >= 0.0);
    CHECK(run.final_balacc <= 1.0);
    mean += run.final_balacc;
  }
  mean /= 3.0;
  CHECK(report.mean_balacc == doctest::Approx(mean).epsilon(1e-12));
  double ss = 0.0;
  for (const auto& run : report.runs) {
    ss += (run.final_balacc - mean) * (run.final_balacc - mean);
  }
  CHECK(report.std_balacc == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-12));
  CHECK(report.mean_train_seconds >= 0.0);
}

TEST_CASE("a single run reports zero deviation") {
  const auto all = planted_dataset(6, 4, 71);
  auto cfg = quiet_config();
  cfg.runs = 1;
  const auto report = repeat_runs(planted_net(), all, cfg);
  CHECK(report.runs.size() == 1);
  CHECK(report.std_balacc == 0.0);
  CHECK(report.mean_balacc == report.runs[0].final_balacc);
}

TEST_CASE("forcing identical run seeds collapses the variance") {
  const auto all = planted_dataset(8, 6, 81);
  auto cfg = quiet_config();
  cfg.runs = 3;
  const std::vector<std::uint64_t> seeds = {13, 13, 13};
  const auto report = repeat_runs(planted_net(), all, cfg, &seeds);
  CHECK(report.runs[0].final_balacc == report.runs[1].final_balacc);
  CHECK(report.runs[1].final_balacc == report.runs[2].final_balacc);
  CHECK(report.std_balacc == 0.0);

  const std::vector<std::uint64_t> wrong = {1, 2};
  CHECK_THROWS_AS(repeat_runs(planted_net(), all, cfg, &wrong), Error);
}

TEST_CASE("first layer inspection flags filters above the threshold") {
  const auto spec = build_deeplnino(135, 101, 6);
  Network<float> net(spec);
  auto params = net.zero_params();

  const auto none = inspect_first_layer(spec, params);
  CHECK(none.flagged.empty());
  CHECK(none.threshold == 0.004);
  REQUIRE(none.weights.size() == 16);
  REQUIRE(none.weights[0].size() == 6);

  // weights are stored channel-major: index ci * filters + f
  params.layers[0][2 * 16 + 9] = 0.005f;
  params.layers[0][4 * 16 + 3] = -0.25f;
  const auto insp = inspect_first_layer(spec, params);
  CHECK(insp.flagged == std::vector<std::uint32_t>{9});
  CHECK(insp.weights[9][2] == 0.005f);
  CHECK(insp.weights[3][4] == -0.25f);

  params.layers[0][2 * 16 + 9] = 0.0039f;
  CHECK(inspect_first_layer(spec, params).flagged.empty());
}

TEST_CASE("inspection artifacts round trip to csv and heatmap") {
  const auto spec = build_deeplnino(135, 101, 6);
  Network<float> net(spec);
  auto params = net.zero_params();
  params.layers[0][0 * 16 + 0] = 0.25f;
  params.layers[0][1 * 16 + 0] = -0.125f;
  params.layers[0][3 * 16 + 5] = -0.5f;
  const auto insp = inspect_first_layer(spec, params);

  const fs::path csv = tmp_dir() / "weights.csv";
  write_inspection_csv(insp, csv);
  std::ifstream is(csv);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    std::size_t cols = 1;
    for (char ch : line) cols += ch == ',';
    CHECK(cols == 6);
    if (rows == 0) {
      std::istringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      CHECK(std::stof(cell) == doctest::Approx(0.25f));
      std::getline(ss, cell, ',');
      CHECK(std::stof(cell) == doctest::Approx(-0.125f));
    }
    ++rows;
  }
  CHECK(rows == 16);

  const fs::path map = tmp_dir() / "weights.ppm";
  write_inspection_heatmap(insp, map);
  const auto ppm = read_ppm(map);
  CHECK(ppm.width == 6 * 24);
  CHECK(ppm.height == 16 * 24);
  // filter 0 channel 0 carries the positive maximum: full red
  CHECK(ppm.px(12, 12) == std::array<std::uint8_t, 3>{255, 20, 20});
  // both negative weights share the single negative display color
  CHECK(ppm.px(1 * 24 + 12, 12) == std::array<std::uint8_t, 3>{70, 70, 110});
  CHECK(ppm.px(3 * 24 + 12, 5 * 24 + 12) == std::array<std::uint8_t, 3>{70, 70, 110});
  // a zero weight renders white
  CHECK(ppm.px(2 * 24 + 12, 12) == std::array<std::uint8_t, 3>{255, 255, 255});
}

TEST_CASE("inspection requires a pointwise first convolution") {
  const auto spec = build_deepcnet(2, 4, 32, 32, 3);
  Network<float> net(spec);
  const auto params = net.zero_params();
  try {
    inspect_first_layer(spec, params);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ArchitectureMismatch);
  }

  const auto good = build_deeplnino(135, 101, 6);
  ParamSet<float> bad;
  bad.layers = {{1.0f, 2.0f}};
  CHECK_THROWS_AS(inspect_first_layer(good, bad), Error);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  auto bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.runs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.class_weight_ratio = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.train_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.adadelta_rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.adadelta_eps = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.l1 = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

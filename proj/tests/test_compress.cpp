#include <cmath>
#include <map>
#include <set>

#include "c2g/compress.hpp"
#include "c2g/error.hpp"
#include "c2g/rng.hpp"
#include "c2g/types.hpp"
#include "doctest.h"
#include "support/shift_oracle.hpp"

using namespace c2g;

namespace {

ObjectImage image_with(double width, double height, std::vector<ObjectRecord> objects,
                       std::size_t channels = 1) {
  ObjectImage img;
  img.width_um = width;
  img.height_um = height;
  img.resolution_um_per_px = 0.5;
  img.channels = channels;
  img.objects = std::move(objects);
  img.id = "test";
  return img;
}

ObjectRecord obj(double x, double y, std::vector<double> props = {1.0}) {
  return ObjectRecord{x, y, std::move(props)};
}

oracle::Outcome run_oracle(const BinnedGrid& binned, const std::vector<ObjectRecord>& objects) {
  std::vector<std::pair<double, double>> positions;
  positions.reserve(objects.size());
  for (const auto& o : objects) positions.emplace_back(o.x_um, o.y_um);
  std::map<oracle::Node, std::vector<int>> members;
  for (const auto& [key, objs] : binned.nodes) {
    const oracle::Node node{static_cast<long>(key / static_cast<std::uint64_t>(binned.dims.ky)),
                            static_cast<long>(key % static_cast<std::uint64_t>(binned.dims.ky))};
    for (std::uint32_t i : objs) members[node].push_back(static_cast<int>(i));
  }
  return oracle::resolve(binned.dims.kx, binned.dims.ky, binned.d_um, positions, members);
}

void check_against_oracle(const BinnedGrid& binned, const std::vector<ObjectRecord>& objects) {
  const auto got = priority_shift(binned, objects);
  const auto want = run_oracle(binned, objects);
  REQUIRE(got.size() == objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& a = got[i];
    switch (want.state[i]) {
      case oracle::State::Kept: REQUIRE(a.disposition == Disposition::KeptInPlace); break;
      case oracle::State::Shifted: REQUIRE(a.disposition == Disposition::Shifted); break;
      case oracle::State::Deleted: REQUIRE(a.disposition == Disposition::Deleted); break;
    }
    if (want.state[i] != oracle::State::Deleted) {
      REQUIRE(a.final.x == want.final_node[i].first);
      REQUIRE(a.final.y == want.final_node[i].second);
    }
  }
}

void check_invariants(const BinnedGrid& binned, const std::vector<ObjectRecord>& objects) {
  const auto out = priority_shift(binned, objects);
  std::set<std::pair<std::int64_t, std::int64_t>> finals;
  std::size_t placed = 0;
  for (const auto& a : out) {
    if (a.disposition == Disposition::Deleted) continue;
    ++placed;
    // locality
    REQUIRE(std::llabs(a.final.x - a.binned.x) <= 1);
    REQUIRE(std::llabs(a.final.y - a.binned.y) <= 1);
    if (a.disposition == Disposition::KeptInPlace) REQUIRE(a.final == a.binned);
    if (a.disposition == Disposition::Shifted) REQUIRE(a.final != a.binned);
    // on the grid
    REQUIRE(a.final.x >= 0);
    REQUIRE(a.final.x < binned.dims.kx);
    REQUIRE(a.final.y >= 0);
    REQUIRE(a.final.y < binned.dims.ky);
    finals.insert({a.final.x, a.final.y});
  }
  // bijectivity: placed objects occupy distinct nodes
  REQUIRE(finals.size() == placed);

  // retention priority per conflicted node
  for (const auto& [key, members] : binned.nodes) {
    if (members.size() < 2) continue;
    const auto gx = static_cast<std::int64_t>(key / static_cast<std::uint64_t>(binned.dims.ky));
    const auto gy = static_cast<std::int64_t>(key % static_cast<std::uint64_t>(binned.dims.ky));
    const double cx = binned.d_um * static_cast<double>(gx);
    const double cy = binned.d_um * static_cast<double>(gy);
    double kept_dist = 0.0;
    bool found = false;
    for (std::uint32_t i : members) {
      if (out[i].disposition == Disposition::KeptInPlace) {
        const double dx = objects[i].x_um - cx, dy = objects[i].y_um - cy;
        kept_dist = dx * dx + dy * dy;
        found = true;
      }
    }
    REQUIRE(found);  // exactly one member stays on a conflicted node
    for (std::uint32_t i : members) {
      const double dx = objects[i].x_um - cx, dy = objects[i].y_um - cy;
      REQUIRE(kept_dist <= dx * dx + dy * dy);
    }
  }
}

}  // namespace

TEST_CASE("grid spacing examples") {
  SUBCASE("single density 1/100") {
    BatchStats s;
    s.densities = {1.0 / 100.0};
    CHECK(estimate_grid_spacing(s) == 5.0);
  }
  SUBCASE("density pair {1/64, 1/144}") {
    BatchStats s;
    s.densities = {1.0 / 64.0, 1.0 / 144.0};
    CHECK(estimate_grid_spacing(s) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("reference aggregate density") {
    BatchStats s;
    s.densities = {4149.0 / 338688.0};
    CHECK(estimate_grid_spacing(s) == doctest::Approx(4.517500316616377).epsilon(1e-12));
    CHECK(estimate_grid_spacing(s, true) == 5.0);
  }
  SUBCASE("rounding goes to the nearest integer") {
    BatchStats s;
    s.densities = {1.0 / 77.44};  // sqrt = 8.8 -> d = 4.4
    CHECK(estimate_grid_spacing(s) == doctest::Approx(4.4).epsilon(1e-12));
    CHECK(estimate_grid_spacing(s, true) == 4.0);
  }
}

TEST_CASE("grid spacing is monotone in density") {
  Rng rng(811);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.bounded(16);
    BatchStats base, denser;
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = rng.uniform_real(1e-4, 1.0);
      base.densities.push_back(rho);
      denser.densities.push_back(rho * rng.uniform_real(1.0001, 4.0));
    }
    CHECK(estimate_grid_spacing(denser) < estimate_grid_spacing(base));
  }
}

TEST_CASE("grid spacing error paths") {
  BatchStats empty;
  CHECK_THROWS_AS(estimate_grid_spacing(empty), Error);

  BatchStats zero;
  zero.densities = {0.5, 0.0};
  try {
    estimate_grid_spacing(zero);
    FAIL("expected NonPositiveDensity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveDensity);
  }

  BatchStats tiny;  // d = 0.05 rounds to zero micrometers
  tiny.densities = {100.0};
  CHECK(estimate_grid_spacing(tiny) == doctest::Approx(0.05));
  CHECK_THROWS_AS(estimate_grid_spacing(tiny, true), Error);
}

TEST_CASE("binning examples") {
  SUBCASE("half-up rounding") {
    const auto img = image_with(15.0, 15.0, {obj(7.5, 2.4)});
    const auto binned = bin_objects(img, 5.0);
    REQUIRE(binned.dims.ky == 3);
    REQUIRE(binned.nodes.size() == 1);
    const auto& [key, members] = *binned.nodes.begin();
    CHECK(key / 3 == 2);  // round(1.5) goes up
    CHECK(key % 3 == 0);  // round(0.48) goes down
    CHECK(members == std::vector<std::uint32_t>{0});
  }
  SUBCASE("origin stays at node (0,0)") {
    const auto img = image_with(10.0, 10.0, {obj(0.0, 0.0)});
    const auto binned = bin_objects(img, 3.0);
    REQUIRE(binned.nodes.size() == 1);
    CHECK(binned.nodes.begin()->first == 0);
  }
  SUBCASE("close pair collides on a clamped boundary node") {
    // 14x14 um at d=5 gives a 3x3 grid; (13,13) would round to the
    // nonexistent line 3 and clamps to 2.
    const auto img = image_with(14.0, 14.0, {obj(12.0, 12.0), obj(13.0, 13.0)});
    const auto binned = bin_objects(img, 5.0);
    CHECK(binned.dims.kx == 3);
    CHECK(binned.dims.ky == 3);
    REQUIRE(binned.nodes.size() == 1);
    const auto& [key, members] = *binned.nodes.begin();
    CHECK(key == 2 * 3 + 2);
    CHECK(members.size() == 2);
  }
}

TEST_CASE("compression geometry") {
  SUBCASE("672x504 at d=5 gives the reference input plane") {
    auto img = image_with(672.0, 504.0, {}, 6);
    img.objects.push_back(obj(1.0, 1.0, {1, 2, 3, 4, 5, 6}));
    const auto out = compress(img, 5.0);
    CHECK(out.spec.kx == 135);
    CHECK(out.spec.ky == 101);
    CHECK(out.spec.channels == 6);
  }
  SUBCASE("50x50 um at d=5 compresses 100:1") {
    // 100x100 px at 0.5 um/px
    const auto img = image_with(50.0, 50.0, {obj(26.0, 24.0)});
    const auto out = compress(img, 5.0);
    CHECK(out.spec.kx == 10);
    CHECK(out.spec.ky == 10);
  }
  SUBCASE("empty image compresses to all-zero") {
    const auto img = image_with(20.0, 20.0, {});
    ImageCompressionStats stats;
    const auto out = compress(img, 5.0, &stats);
    CHECK(stats.objects_in == 0);
    CHECK(stats.deleted == 0);
    CHECK(out.meta.objects_kept == 0);
    for (float v : out.data) CHECK(v == 0.0f);
    CHECK(out.occupied_count() == 0);
  }
}

TEST_CASE("quadrant halves match the independent sector oracle") {
  SUBCASE("boundary offsets, resolved by the half-open convention") {
    const std::pair<std::pair<double, double>, int> cases[] = {
        {{0.0, 0.0}, 0},  {{1.0, 0.0}, 0},   {{1.0, 1.0}, 1},   {{0.0, 1.0}, 2},
        {{-1.0, 1.0}, 3}, {{-1.0, 0.0}, 4},  {{-1.0, -1.0}, 5}, {{0.0, -1.0}, 6},
        {{1.0, -1.0}, 7},
    };
    for (const auto& [off, want] : cases) {
      for (double scale : {1.0, 2.5, 117.0}) {
        CAPTURE(off.first);
        CAPTURE(off.second);
        CHECK(quadrant_half(off.first * scale, off.second * scale) == want);
        CHECK(oracle::sector_of(off.first * scale, off.second * scale) == want);
      }
    }
  }
  SUBCASE("random offsets") {
    Rng rng(404);
    for (int i = 0; i < 100000; ++i) {
      const double ox = rng.uniform_real(-10.0, 10.0);
      const double oy = rng.uniform_real(-10.0, 10.0);
      CAPTURE(ox);
      CAPTURE(oy);
      REQUIRE(quadrant_half(ox, oy) == oracle::sector_of(ox, oy));
    }
  }
}

TEST_CASE("neighbor priority table matches the geometric derivation") {
  for (int sector = 0; sector < 8; ++sector) {
    const auto want = oracle::ranking_for_sector(sector);
    REQUIRE(want.size() == 8);
    for (int rank = 0; rank < 8; ++rank) {
      CAPTURE(sector);
      CAPTURE(rank);
      CHECK(kNeighborPriority[sector][rank][0] == want[static_cast<std::size_t>(rank)].first);
      CHECK(kNeighborPriority[sector][rank][1] == want[static_cast<std::size_t>(rank)].second);
    }
  }
}

TEST_CASE("priority shift hand cases") {
  SUBCASE("closer object keeps the node, the other takes its sector's first pick") {
    const auto img = image_with(5.0, 5.0, {obj(2.1, 2.05), obj(2.4, 2.1)});
    const auto binned = bin_objects(img, 1.0);
    REQUIRE(binned.nodes.size() == 1);
    const auto out = priority_shift(binned, img.objects);
    CHECK(out[0].disposition == Disposition::KeptInPlace);
    CHECK(out[0].final == NodeCoord{2, 2});
    CHECK(out[1].disposition == Disposition::Shifted);
    CHECK(out[1].final == NodeCoord{3, 2});  // sector 0 prefers east
  }
  SUBCASE("ten objects with no free neighbors: one kept, nine deleted") {
    std::vector<ObjectRecord> objects;
    // one object on each node around (1,1), d = 1
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        objects.push_back(obj(1.0 + dx, 1.0 + dy));
      }
    }
    for (int i = 0; i < 10; ++i) {
      objects.push_back(obj(1.0 + 0.01 * i, 1.0));
    }
    const auto img = image_with(3.0, 3.0, objects);
    const auto binned = bin_objects(img, 1.0);
    const auto out = priority_shift(binned, img.objects);
    int kept = 0, deleted = 0;
    for (std::size_t i = 8; i < out.size(); ++i) {
      if (out[i].disposition == Disposition::KeptInPlace) ++kept;
      if (out[i].disposition == Disposition::Deleted) ++deleted;
    }
    CHECK(kept == 1);
    CHECK(deleted == 9);
    CHECK(out[8].disposition == Disposition::KeptInPlace);  // distance 0 wins
  }
  SUBCASE("deletion starts only after all eight neighbors are used") {
    std::vector<ObjectRecord> objects;
    for (int i = 0; i < 11; ++i) objects.push_back(obj(2.0 + 0.01 * i, 2.0));
    const auto img = image_with(5.0, 5.0, objects);
    const auto binned = bin_objects(img, 1.0);
    const auto out = priority_shift(binned, img.objects);
    int kept = 0, shifted = 0, deleted = 0;
    for (const auto& a : out) {
      kept += a.disposition == Disposition::KeptInPlace;
      shifted += a.disposition == Disposition::Shifted;
      deleted += a.disposition == Disposition::Deleted;
    }
    CHECK(kept == 1);
    CHECK(shifted == 8);
    CHECK(deleted == 2);
  }
}

TEST_CASE("priority shift equals the brute-force oracle on random instances") {
  const double spacings[] = {0.5, 1.0, 2.5, 5.0};
  for (int t = 0; t < 1000; ++t) {
    Rng rng(derive_seed(20260822, static_cast<std::uint64_t>(t)));
    const auto kx = static_cast<std::int64_t>(1 + rng.bounded(8));
    const auto ky = static_cast<std::int64_t>(1 + rng.bounded(8));
    const double d = spacings[rng.bounded(4)];
    const std::size_t nobj = rng.bounded(301);

    std::vector<ObjectRecord> objects;
    for (std::size_t i = 0; i < nobj; ++i) {
      objects.push_back(obj(rng.uniform_real(0.0, static_cast<double>(kx) * d),
                            rng.uniform_real(0.0, static_cast<double>(ky) * d)));
    }
    const auto img =
        image_with(static_cast<double>(kx) * d, static_cast<double>(ky) * d, objects);
    const auto binned = bin_objects(img, d);
    REQUIRE(binned.dims.kx == kx);
    REQUIRE(binned.dims.ky == ky);
    CAPTURE(t);
    check_against_oracle(binned, img.objects);
    check_invariants(binned, img.objects);
  }
}

TEST_CASE("compression conserves kept property values") {
  Rng rng(5150);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + rng.bounded(200);
    std::vector<ObjectRecord> objects;
    for (std::size_t i = 0; i < n; ++i) {
      objects.push_back(obj(rng.uniform_real(0.0, 30.0), rng.uniform_real(0.0, 30.0),
                            {rng.uniform_real(0.0, 10.0), rng.uniform_real(0.0, 10.0)}));
    }
    auto img = image_with(30.0, 30.0, objects, 2);
    const auto binned = bin_objects(img, 2.5);
    const auto assignments = priority_shift(binned, img.objects);
    const auto out = compress(img, 2.5);

    for (std::uint32_t c = 0; c < 2; ++c) {
      double expect = 0.0;
      for (const auto& a : assignments) {
        if (a.disposition == Disposition::Deleted) continue;
        expect += static_cast<double>(static_cast<float>(img.objects[a.object].props[c]));
      }
      double got = 0.0;
      for (std::uint32_t ix = 0; ix < out.spec.kx; ++ix) {
        for (std::uint32_t iy = 0; iy < out.spec.ky; ++iy) {
          got += static_cast<double>(out.at(ix, iy, c));
        }
      }
      CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    }

    // disposition totals and occupancy agree
    ImageCompressionStats stats;
    const auto out2 = compress(img, 2.5, &stats);
    CHECK(stats.kept_in_place + stats.shifted + stats.deleted == stats.objects_in);
    CHECK(out2.occupied_count() == stats.kept_in_place + stats.shifted);
    CHECK(out2.meta.objects_kept == stats.kept_in_place + stats.shifted);
    CHECK(out2.meta.objects_deleted == stats.deleted);
  }
}

TEST_CASE("batch compression") {
  Rng rng(33);
  std::vector<ObjectRecord> objects;
  for (int i = 0; i < 100; ++i) {
    objects.push_back(
        obj(rng.uniform_real(0.0, 40.0), rng.uniform_real(0.0, 40.0), {1.0, 2.0}));
  }
  const auto img = image_with(40.0, 40.0, objects, 2);

  SUBCASE("batch of one equals single-image compression at the estimated d") {
    BatchReport rep;
    const auto batch = compress_batch({img}, std::nullopt, false, &rep);
    REQUIRE(batch.size() == 1);
    CHECK(rep.d_estimated);
    const double d = estimate_grid_spacing(BatchStats::from_images({img}));
    CHECK(rep.d_um == d);
    const auto single = compress(img, d);
    CHECK(batch[0].data == single.data);
    CHECK(batch[0].occupancy == single.occupancy);
  }
  SUBCASE("three identical images give three identical outputs") {
    const auto batch = compress_batch({img, img, img}, std::nullopt, false);
    REQUIRE(batch.size() == 3);
    CHECK(batch[0].data == batch[1].data);
    CHECK(batch[1].data == batch[2].data);
    CHECK(batch[0].occupancy == batch[2].occupancy);
  }
  SUBCASE("mixed channel counts are rejected") {
    auto other = image_with(40.0, 40.0, {obj(1.0, 1.0, {1.0})}, 1);
    try {
      compress_batch({img, other}, std::nullopt, false);
      FAIL("expected MixedChannelCounts");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MixedChannelCounts);
    }
  }
}

TEST_CASE("deletion stays rare at the estimated spacing") {
  std::vector<ObjectImage> batch;
  Rng rng(616);
  for (int i = 0; i < 5; ++i) {
    std::vector<ObjectRecord> objects;
    for (int k = 0; k < 4000; ++k) {
      objects.push_back(
          obj(rng.uniform_real(0.0, 672.0), rng.uniform_real(0.0, 504.0), {1.0}));
    }
    batch.push_back(image_with(672.0, 504.0, std::move(objects)));
  }
  BatchReport rep;
  compress_batch(batch, std::nullopt, false, &rep);
  const double total = 5.0 * 4000.0;
  CHECK(static_cast<double>(rep.total_deleted) / total < 0.05);
  CHECK(rep.total_kept + rep.total_deleted == static_cast<std::uint64_t>(total));
}

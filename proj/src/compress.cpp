#include "c2g/compress.hpp"

#include <algorithm>
#include <unordered_set>

#include "c2g/error.hpp"

namespace c2g {

BatchStats BatchStats::from_images(const std::vector<ObjectImage>& images) {
  BatchStats stats;
  stats.densities.reserve(images.size());
  for (const auto& img : images) stats.densities.push_back(img.density());
  return stats;
}

double estimate_grid_spacing(const BatchStats& stats, bool round_to_int) {
  if (stats.densities.empty()) throw Error(ErrorCode::EmptyBatch, "no densities to estimate from");
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.densities.size(); ++i) {
    const double rho = stats.densities[i];
    if (!(rho > 0.0) || !std::isfinite(rho)) {
      throw Error(ErrorCode::NonPositiveDensity,
                  "image " + std::to_string(i) + " has non-positive density");
    }
    sum += std::sqrt(1.0 / rho);
  }
  double d = 0.5 * sum / static_cast<double>(stats.densities.size());
  if (round_to_int) {
    d = static_cast<double>(grid_round(d));
    if (d <= 0.0) {
      throw Error(ErrorCode::NonPositiveDensity, "grid spacing rounds to zero micrometers");
    }
  }
  return d;
}

GridDims grid_dims_for(const ObjectImage& img, double d_um) {
  if (!(d_um > 0.0) || !std::isfinite(d_um)) {
    throw Error(ErrorCode::NonPositiveDensity, "grid spacing must be positive and finite");
  }
  GridDims dims;
  dims.kx = static_cast<std::int64_t>(std::ceil(img.width_um / d_um));
  dims.ky = static_cast<std::int64_t>(std::ceil(img.height_um / d_um));
  if (dims.kx <= 0 || dims.ky <= 0) {
    throw Error(ErrorCode::NonPositiveDensity, "grid collapses to zero nodes");
  }
  return dims;
}

BinnedGrid bin_objects(const ObjectImage& img, double d_um) {
  img.validate();
  BinnedGrid binned;
  binned.dims = grid_dims_for(img, d_um);
  binned.d_um = d_um;
  for (std::uint32_t i = 0; i < img.objects.size(); ++i) {
    const auto& obj = img.objects[i];
    std::int64_t nx = grid_round(obj.x_um / d_um);
    std::int64_t ny = grid_round(obj.y_um / d_um);
    nx = std::clamp<std::int64_t>(nx, 0, binned.dims.kx - 1);
    ny = std::clamp<std::int64_t>(ny, 0, binned.dims.ky - 1);
    const std::uint64_t key =
        static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(binned.dims.ky) +
        static_cast<std::uint64_t>(ny);
    binned.nodes[key].push_back(i);
  }
  return binned;
}

int quadrant_half(double ox, double oy) {
  if (ox == 0.0 && oy == 0.0) return 0;
  if (oy >= 0.0) {
    if (ox > 0.0) return oy < ox ? 0 : 1;
    if (oy > 0.0) return -ox < oy ? 2 : 3;
    return 4;  // negative x axis
  }
  if (ox < 0.0) return oy > ox ? 4 : 5;
  return ox < -oy ? 6 : 7;
}

// Sector k spans [k*45, (k+1)*45) degrees. Each row lists the eight neighbor
// offsets (dx, dy) from most to least preferred for objects in that sector.
const std::int8_t kNeighborPriority[8][8][2] = {
    {{1, 0}, {1, 1}, {1, -1}, {0, 1}, {0, -1}, {-1, 1}, {-1, 0}, {-1, -1}},
    {{0, 1}, {1, 1}, {-1, 1}, {1, 0}, {-1, 0}, {1, -1}, {0, -1}, {-1, -1}},
    {{0, 1}, {-1, 1}, {1, 1}, {-1, 0}, {1, 0}, {-1, -1}, {0, -1}, {1, -1}},
    {{-1, 0}, {-1, 1}, {-1, -1}, {0, 1}, {0, -1}, {1, 1}, {1, 0}, {1, -1}},
    {{-1, 0}, {-1, -1}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}},
    {{0, -1}, {-1, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}},
    {{0, -1}, {1, -1}, {-1, -1}, {1, 0}, {-1, 0}, {1, 1}, {0, 1}, {-1, 1}},
    {{1, 0}, {1, -1}, {1, 1}, {0, -1}, {0, 1}, {-1, -1}, {-1, 0}, {-1, 1}},
};

std::vector<Assignment> priority_shift(const BinnedGrid& binned,
                                       const std::vector<ObjectRecord>& objects) {
  const std::int64_t kx = binned.dims.kx;
  const std::int64_t ky = binned.dims.ky;
  const double d = binned.d_um;

  std::vector<Assignment> out(objects.size());
  std::unordered_set<std::uint64_t> occupied;
  occupied.reserve(binned.nodes.size() * 2);

  std::vector<std::uint64_t> conflicts;
  for (const auto& [key, objs] : binned.nodes) {
    occupied.insert(key);
    if (objs.size() > 1) conflicts.push_back(key);
    for (std::uint32_t idx : objs) {
      auto& a = out[idx];
      a.object = idx;
      a.binned = {static_cast<std::int64_t>(key / static_cast<std::uint64_t>(ky)),
                  static_cast<std::int64_t>(key % static_cast<std::uint64_t>(ky))};
      a.final = a.binned;
      a.disposition = Disposition::KeptInPlace;
    }
  }

  // Row-major over the grid: all nodes of row y before row y+1.
  std::sort(conflicts.begin(), conflicts.end(), [ky](std::uint64_t a, std::uint64_t b) {
    const auto ay = a % static_cast<std::uint64_t>(ky), by = b % static_cast<std::uint64_t>(ky);
    if (ay != by) return ay < by;
    return a / static_cast<std::uint64_t>(ky) < b / static_cast<std::uint64_t>(ky);
  });

  for (std::uint64_t key : conflicts) {
    const std::int64_t gx = static_cast<std::int64_t>(key / static_cast<std::uint64_t>(ky));
    const std::int64_t gy = static_cast<std::int64_t>(key % static_cast<std::uint64_t>(ky));
    const double cx = d * static_cast<double>(gx);
    const double cy = d * static_cast<double>(gy);

    std::vector<std::uint32_t> members = binned.nodes.at(key);
    std::sort(members.begin(), members.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double dax = objects[a].x_um - cx, day = objects[a].y_um - cy;
      const double dbx = objects[b].x_um - cx, dby = objects[b].y_um - cy;
      const double da = dax * dax + day * day, db = dbx * dbx + dby * dby;
      if (da != db) return da < db;
      return a < b;
    });

    // Free 8-neighborhood snapshot for this node, consumed as objects claim
    // entries.
    bool free_nb[3][3] = {};
    int free_count = 0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const std::int64_t nx = gx + dx, ny = gy + dy;
        if (nx < 0 || nx >= kx || ny < 0 || ny >= ky) continue;
        const std::uint64_t nkey = static_cast<std::uint64_t>(nx) * static_cast<std::uint64_t>(ky) +
                                   static_cast<std::uint64_t>(ny);
        if (!occupied.count(nkey)) {
          free_nb[dx + 1][dy + 1] = true;
          ++free_count;
        }
      }
    }

    for (std::size_t m = 1; m < members.size(); ++m) {
      const std::uint32_t idx = members[m];
      auto& a = out[idx];
      if (free_count == 0) {
        a.disposition = Disposition::Deleted;
        continue;
      }
      const int sector = quadrant_half(objects[idx].x_um - cx, objects[idx].y_um - cy);
      for (int rank = 0; rank < 8; ++rank) {
        const int dx = kNeighborPriority[sector][rank][0];
        const int dy = kNeighborPriority[sector][rank][1];
        if (!free_nb[dx + 1][dy + 1]) continue;
        free_nb[dx + 1][dy + 1] = false;
        --free_count;
        a.disposition = Disposition::Shifted;
        a.final = {gx + dx, gy + dy};
        occupied.insert(static_cast<std::uint64_t>(a.final.x) * static_cast<std::uint64_t>(ky) +
                        static_cast<std::uint64_t>(a.final.y));
        break;
      }
    }
  }
  return out;
}

C2GImage compress(const ObjectImage& img, double d_um, ImageCompressionStats* stats) {
  const BinnedGrid binned = bin_objects(img, d_um);
  const auto assignments = priority_shift(binned, img.objects);

  GridSpec spec;
  spec.d_um = d_um;
  spec.kx = static_cast<std::uint32_t>(binned.dims.kx);
  spec.ky = static_cast<std::uint32_t>(binned.dims.ky);
  spec.channels = img.channels;

  C2GImage out = C2GImage::zeros(spec);
  out.meta.source_id = img.id;

  ImageCompressionStats s;
  s.objects_in = static_cast<std::uint32_t>(img.objects.size());
  for (const auto& [key, objs] : binned.nodes) {
    (void)key;
    if (objs.size() > 1) ++s.conflict_nodes;
  }
  for (const auto& a : assignments) {
    switch (a.disposition) {
      case Disposition::KeptInPlace: ++s.kept_in_place; break;
      case Disposition::Shifted: ++s.shifted; break;
      case Disposition::Deleted: ++s.deleted; continue;
    }
    const auto& obj = img.objects[a.object];
    const std::size_t ix = static_cast<std::size_t>(a.final.x);
    const std::size_t iy = static_cast<std::size_t>(a.final.y);
    for (std::uint32_t c = 0; c < spec.channels; ++c) {
      out.at(ix, iy, c) = static_cast<float>(obj.props[c]);
    }
    out.occupancy[out.node_index(ix, iy)] = 1;
  }
  out.meta.objects_kept = s.kept_in_place + s.shifted;
  out.meta.objects_deleted = s.deleted;
  if (stats) *stats = s;
  return out;
}

std::vector<C2GImage> compress_batch(const std::vector<ObjectImage>& images,
                                     std::optional<double> d_override, bool round_estimate,
                                     BatchReport* report) {
  if (images.empty()) throw Error(ErrorCode::EmptyBatch, "empty image batch");
  for (const auto& img : images) img.validate();
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (images[i].channels != images[0].channels) {
      throw Error(ErrorCode::MixedChannelCounts,
                  "image " + std::to_string(i) + " has " + std::to_string(images[i].channels) +
                      " channels, expected " + std::to_string(images[0].channels));
    }
  }

  double d;
  bool estimated = false;
  if (d_override) {
    d = *d_override;
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::NonPositiveDensity, "grid spacing override must be positive");
    }
  } else {
    d = estimate_grid_spacing(BatchStats::from_images(images), round_estimate);
    estimated = true;
  }

  std::vector<C2GImage> out;
  out.reserve(images.size());
  BatchReport rep;
  rep.d_um = d;
  rep.d_estimated = estimated;
  for (const auto& img : images) {
    ImageCompressionStats s;
    out.push_back(compress(img, d, &s));
    rep.per_image.push_back(s);
    rep.total_kept += s.kept_in_place + s.shifted;
    rep.total_deleted += s.deleted;
  }
  if (report) *report = rep;
  return out;
}

}  // namespace c2g

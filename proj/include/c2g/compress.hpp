#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "c2g/types.hpp"

namespace c2g {

/// Per-batch object densities feeding the grid-spacing heuristic.
struct BatchStats {
  std::vector<double> densities;  // objects per um^2, one entry per image

  static BatchStats from_images(const std::vector<ObjectImage>& images);
};

/// Rounding convention used for grid binning and integer spacing: round half
/// away from zero. Centralized so every consumer shares the same ties.
inline std::int64_t grid_round(double v) { return std::llround(v); }

/// Grid spacing d = 1/2 * mean over images of sqrt(1/density).
/// With round_to_int, the result is rounded to the nearest integer micrometer.
double estimate_grid_spacing(const BatchStats& stats, bool round_to_int = false);

struct GridDims {
  std::int64_t kx = 0;
  std::int64_t ky = 0;
};

/// kx = ceil(width/d), ky = ceil(height/d).
GridDims grid_dims_for(const ObjectImage& img, double d_um);

/// Eq.-2 binning: node = round(X/d) componentwise, clamped onto the grid
/// (coordinates in the last half-spacing strip would otherwise round to a
/// grid line that does not exist).
struct BinnedGrid {
  GridDims dims;
  double d_um = 0.0;
  // node key = ix*ky + iy -> object indices binned there
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> nodes;
};

BinnedGrid bin_objects(const ObjectImage& img, double d_um);

enum class Disposition : std::uint8_t { KeptInPlace, Shifted, Deleted };

struct NodeCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool operator==(const NodeCoord&) const = default;
};

struct Assignment {
  std::uint32_t object = 0;
  NodeCoord binned;        // Eq.-2 node
  NodeCoord final;         // valid unless deleted
  Disposition disposition = Disposition::KeptInPlace;
};

/// Which of the eight 45-degree sectors around a node contains the offset
/// (ox, oy)? Sector k covers angles [k*45, (k+1)*45) degrees measured from
/// the +x axis; a zero offset maps to sector 0.
int quadrant_half(double ox, double oy);

/// Neighbor preference per sector: the sector's bounding side first, then the
/// sector's bounding corner, then the side's other flanking corner, then the
/// remaining five by increasing angular distance from the sector center with
/// sides ranked before corners on ties. Offsets are (dx, dy) grid steps.
extern const std::int8_t kNeighborPriority[8][8][2];

/// Resolves binning conflicts: per conflicted node (processed in row-major
/// node order, y before x), objects are sorted by squared Euclidean distance
/// to the node's continuous center d*(gx, gy) (ties: lower object index).
/// The closest keeps the node; the rest move to the free 8-adjacent node of
/// highest priority for their quadrant half; when no free neighbor remains
/// they are deleted. Returns one assignment per object.
std::vector<Assignment> priority_shift(const BinnedGrid& binned,
                                       const std::vector<ObjectRecord>& objects);

struct ImageCompressionStats {
  std::uint32_t objects_in = 0;
  std::uint32_t kept_in_place = 0;
  std::uint32_t shifted = 0;
  std::uint32_t deleted = 0;
  std::uint32_t conflict_nodes = 0;
};

/// Full Cell2Grid compression of one image at spacing d.
C2GImage compress(const ObjectImage& img, double d_um, ImageCompressionStats* stats = nullptr);

struct BatchReport {
  double d_um = 0.0;
  bool d_estimated = false;
  std::vector<ImageCompressionStats> per_image;
  std::uint64_t total_kept = 0;
  std::uint64_t total_deleted = 0;
};

/// Compresses a batch with one shared spacing (estimated by Eq. 1 over the
/// batch unless overridden). Images must agree on channel count.
std::vector<C2GImage> compress_batch(const std::vector<ObjectImage>& images,
                                     std::optional<double> d_override, bool round_estimate,
                                     BatchReport* report = nullptr);

}  // namespace c2g

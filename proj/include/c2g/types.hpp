#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace c2g {

/// One identified object: a point location in physical units plus a vector of
/// P object properties (marker intensities in the mIHC use case).
struct ObjectRecord {
  double x_um = 0.0;
  double y_um = 0.0;
  std::vector<double> props;
};

/// An image's worth of objects plus physical extent and resolution metadata.
/// Immutable after construction by convention; validate() checks the type
/// invariants (objects in [0,w)x[0,h), uniform channel count, finite values).
struct ObjectImage {
  std::vector<ObjectRecord> objects;
  double width_um = 0.0;
  double height_um = 0.0;
  double resolution_um_per_px = 0.0;
  std::size_t channels = 0;
  std::optional<int> label;
  std::string id;

  double area_um2() const { return width_um * height_um; }
  /// Object density in objects per square micrometer.
  double density() const {
    return area_um2() > 0.0 ? static_cast<double>(objects.size()) / area_um2() : 0.0;
  }
  void validate() const;
};

/// Target grid: spacing in micrometers, grid line counts, channel count.
struct GridSpec {
  double d_um = 0.0;
  std::uint32_t kx = 0;
  std::uint32_t ky = 0;
  std::uint32_t channels = 0;

  std::size_t nodes() const { return std::size_t(kx) * ky; }
  std::size_t values() const { return nodes() * channels; }
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

/// The compressed result: a kx*ky*P float tensor where each nonempty pixel
/// holds the property vector of exactly one object.
///
/// Layout: value (ix, iy, c) lives at data[(ix*ky + iy)*P + c]; node (ix, iy)
/// is occupancy[ix*ky + iy]. The same order is used in the binary container.
struct C2GImage {
  struct Meta {
    std::string source_id;
    std::uint32_t objects_kept = 0;
    std::uint32_t objects_deleted = 0;
  };

  GridSpec spec;
  std::vector<float> data;
  std::vector<std::uint8_t> occupancy;
  Meta meta;

  static C2GImage zeros(const GridSpec& spec);

  std::size_t node_index(std::uint32_t ix, std::uint32_t iy) const {
    return std::size_t(ix) * spec.ky + iy;
  }
  float& at(std::uint32_t ix, std::uint32_t iy, std::uint32_t c) {
    return data[node_index(ix, iy) * spec.channels + c];
  }
  float at(std::uint32_t ix, std::uint32_t iy, std::uint32_t c) const {
    return data[node_index(ix, iy) * spec.channels + c];
  }
  bool occupied(std::uint32_t ix, std::uint32_t iy) const {
    return occupancy[node_index(ix, iy)] != 0;
  }
  std::size_t occupied_count() const;

  /// Checks tensor/occupancy sizes and the occupancy-zero coupling
  /// (not occupied => all channels exactly zero). Throws InvalidImage.
  void validate() const;
};

}  // namespace c2g

#include "c2g/types.hpp"

#include <cmath>

#include "c2g/error.hpp"

namespace c2g {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::BadChannelIndex: return "BadChannelIndex";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonPositiveDensity: return "NonPositiveDensity";
    case ErrorCode::MixedChannelCounts: return "MixedChannelCounts";
    case ErrorCode::WindowLargerThanImage: return "WindowLargerThanImage";
    case ErrorCode::ShapeUnderflow: return "ShapeUnderflow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ClassWithTooFewSamples: return "ClassWithTooFewSamples";
    case ErrorCode::SplitDegenerate: return "SplitDegenerate";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::DegenerateSpec: return "DegenerateSpec";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

void ObjectImage::validate() const {
  if (!(width_um > 0.0) || !(height_um > 0.0)) {
    throw Error(ErrorCode::InvalidImage, "image extent must be positive");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const ObjectRecord& o = objects[i];
    if (!std::isfinite(o.x_um) || !std::isfinite(o.y_um)) {
      throw Error(ErrorCode::NonFinite, "object " + std::to_string(i) + " has non-finite coordinates");
    }
    if (o.x_um < 0.0 || o.x_um >= width_um || o.y_um < 0.0 || o.y_um >= height_um) {
      throw Error(ErrorCode::OutOfBounds, "object " + std::to_string(i) + " lies outside the image extent");
    }
    if (o.props.size() != channels) {
      throw Error(ErrorCode::InvalidImage,
                  "object " + std::to_string(i) + " has " + std::to_string(o.props.size()) +
                      " properties, expected " + std::to_string(channels));
    }
    for (double v : o.props) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFinite, "object " + std::to_string(i) + " has a non-finite property");
      }
    }
  }
}

void GridSpec::validate() const {
  if (!(d_um > 0.0)) throw Error(ErrorCode::InvalidImage, "grid spacing must be positive");
  if (kx == 0 || ky == 0) throw Error(ErrorCode::InvalidImage, "grid dimensions must be positive");
}

C2GImage C2GImage::zeros(const GridSpec& spec) {
  spec.validate();
  C2GImage img;
  img.spec = spec;
  img.data.assign(spec.values(), 0.0f);
  img.occupancy.assign(spec.nodes(), 0);
  return img;
}

std::size_t C2GImage::occupied_count() const {
  std::size_t n = 0;
  for (std::uint8_t b : occupancy) n += (b != 0);
  return n;
}

void C2GImage::validate() const {
  spec.validate();
  if (data.size() != spec.values() || occupancy.size() != spec.nodes()) {
    throw Error(ErrorCode::InvalidImage, "tensor/occupancy sizes do not match the grid spec");
  }
  const std::size_t P = spec.channels;
  for (std::size_t n = 0; n < occupancy.size(); ++n) {
    for (std::size_t c = 0; c < P; ++c) {
      float v = data[n * P + c];
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::InvalidImage, "non-finite tensor value at node " + std::to_string(n));
      }
      if (!occupancy[n] && v != 0.0f) {
        throw Error(ErrorCode::InvalidImage,
                    "unoccupied node " + std::to_string(n) + " holds a nonzero value");
      }
    }
  }
}

}  // namespace c2g

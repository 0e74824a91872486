#include "c2g/preview.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "c2g/binio.hpp"
#include "c2g/error.hpp"

namespace c2g {

void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3) {
    throw Error(ErrorCode::DimensionMismatch, "rgb buffer size does not match raster dimensions");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  os << "P6\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!os) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void export_preview(const C2GImage& img, const std::array<std::uint32_t, 3>& channel_map,
                    const std::filesystem::path& path) {
  for (std::uint32_t c : channel_map) {
    if (c >= img.spec.channels) {
      throw Error(ErrorCode::BadChannelIndex,
                  "channel " + std::to_string(c) + " out of range (P=" + std::to_string(img.spec.channels) + ")");
    }
  }

  std::array<float, 3> lo{}, hi{};
  for (int k = 0; k < 3; ++k) {
    lo[k] = std::numeric_limits<float>::max();
    hi[k] = std::numeric_limits<float>::lowest();
    for (std::uint32_t ix = 0; ix < img.spec.kx; ++ix) {
      for (std::uint32_t iy = 0; iy < img.spec.ky; ++iy) {
        float v = img.at(ix, iy, channel_map[k]);
        lo[k] = std::min(lo[k], v);
        hi[k] = std::max(hi[k], v);
      }
    }
  }

  std::vector<std::uint8_t> rgb(std::size_t(img.spec.kx) * img.spec.ky * 3, 0);
  for (std::uint32_t iy = 0; iy < img.spec.ky; ++iy) {
    for (std::uint32_t ix = 0; ix < img.spec.kx; ++ix) {
      std::size_t p = (std::size_t(iy) * img.spec.kx + ix) * 3;
      for (int k = 0; k < 3; ++k) {
        float range = hi[k] - lo[k];
        if (range <= 0.0f) continue;
        float v = (img.at(ix, iy, channel_map[k]) - lo[k]) / range;
        rgb[p + k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
      }
    }
  }
  write_ppm(path, img.spec.kx, img.spec.ky, rgb);
}

namespace {

struct TiffTag {
  std::uint16_t id;
  std::uint16_t type;  // 3 = SHORT, 4 = LONG
  std::uint32_t count;
  std::uint32_t value;
};

}  // namespace

void export_tiff(const C2GImage& img, const std::filesystem::path& path) {
  img.spec.validate();
  const std::uint32_t w = img.spec.kx;
  const std::uint32_t h = img.spec.ky;
  const std::uint32_t P = img.spec.channels;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());

  // Little-endian TIFF: "II", 42, IFD offset. The pixel strip goes first,
  // then per-sample arrays (BitsPerSample/SampleFormat), then the IFD.
  os.write("II", 2);
  binio::put_u16(os, 42);
  const std::uint32_t strip_offset = 8;
  const std::uint64_t strip_bytes = std::uint64_t(w) * h * P * 4;
  const std::uint32_t bits_offset = strip_offset + static_cast<std::uint32_t>(strip_bytes);
  const std::uint32_t fmt_offset = bits_offset + (P > 2 ? 2 * P : 0);
  const std::uint32_t ifd_offset = fmt_offset + (P > 2 ? 2 * P : 0);
  binio::put_u32(os, ifd_offset);

  // Strip in raster order: rows are iy, samples interleaved per pixel.
  for (std::uint32_t iy = 0; iy < h; ++iy) {
    for (std::uint32_t ix = 0; ix < w; ++ix) {
      for (std::uint32_t c = 0; c < P; ++c) binio::put_f32(os, img.at(ix, iy, c));
    }
  }

  // SHORT arrays with count > 2 cannot live inline in the tag value.
  if (P > 2) {
    for (std::uint32_t c = 0; c < P; ++c) binio::put_u16(os, 32);  // BitsPerSample
    for (std::uint32_t c = 0; c < P; ++c) binio::put_u16(os, 3);   // SampleFormat = IEEE float
  }

  auto short_inline = [](std::uint16_t a, std::uint16_t b) {
    return std::uint32_t(a) | (std::uint32_t(b) << 16);
  };

  std::vector<TiffTag> tags;
  tags.push_back({256, 4, 1, w});                      // ImageWidth
  tags.push_back({257, 4, 1, h});                      // ImageLength
  if (P > 2) {
    tags.push_back({258, 3, P, bits_offset});          // BitsPerSample
  } else if (P == 2) {
    tags.push_back({258, 3, 2, short_inline(32, 32)});
  } else {
    tags.push_back({258, 3, 1, 32});
  }
  tags.push_back({259, 3, 1, 1});                      // Compression = none
  tags.push_back({262, 3, 1, 1});                      // Photometric = BlackIsZero
  tags.push_back({273, 4, 1, strip_offset});           // StripOffsets
  tags.push_back({277, 3, 1, P});                      // SamplesPerPixel
  tags.push_back({278, 4, 1, h});                      // RowsPerStrip
  tags.push_back({279, 4, 1, static_cast<std::uint32_t>(strip_bytes)});  // StripByteCounts
  if (P > 2) {
    tags.push_back({339, 3, P, fmt_offset});           // SampleFormat
  } else if (P == 2) {
    tags.push_back({339, 3, 2, short_inline(3, 3)});
  } else {
    tags.push_back({339, 3, 1, 3});
  }
  if (P > 1) {
    // ExtraSamples: unassociated data for samples beyond the first.
    if (P - 1 <= 2) {
      tags.push_back({338, 3, P - 1, P == 2 ? std::uint32_t(2) : short_inline(2, 2)});
    }
  }
  std::sort(tags.begin(), tags.end(), [](const TiffTag& a, const TiffTag& b) { return a.id < b.id; });

  binio::put_u16(os, static_cast<std::uint16_t>(tags.size()));
  for (const TiffTag& t : tags) {
    binio::put_u16(os, t.id);
    binio::put_u16(os, t.type);
    binio::put_u32(os, t.count);
    binio::put_u32(os, t.value);
  }
  binio::put_u32(os, 0);  // no next IFD

  if (!os) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace c2g

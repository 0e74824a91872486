#include "c2g/container.hpp"

#include <fstream>

#include "c2g/binio.hpp"
#include "c2g/error.hpp"

namespace c2g {

namespace {
constexpr char kMagic[17] = "C2GRID-CONTAINER";
constexpr std::uint8_t kVersion = 1;
}  // namespace

void write_c2g(const C2GImage& img, const std::filesystem::path& path) {
  img.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());

  binio::put_magic(os, kMagic);
  binio::put_u8(os, kVersion);
  binio::put_u32(os, img.spec.kx);
  binio::put_u32(os, img.spec.ky);
  binio::put_u32(os, img.spec.channels);
  binio::put_f64(os, img.spec.d_um);
  binio::put_u32(os, img.meta.objects_kept);
  binio::put_u32(os, img.meta.objects_deleted);
  if (img.meta.source_id.size() > 0xffff) {
    throw Error(ErrorCode::IoError, "source id longer than 65535 bytes");
  }
  binio::put_u16(os, static_cast<std::uint16_t>(img.meta.source_id.size()));
  os.write(img.meta.source_id.data(), static_cast<std::streamsize>(img.meta.source_id.size()));

  binio::put_f32_block(os, img.data.data(), img.data.size());

  const std::size_t nodes = img.spec.nodes();
  std::vector<std::uint8_t> bitmap((nodes + 7) / 8, 0);
  for (std::size_t n = 0; n < nodes; ++n) {
    if (img.occupancy[n]) bitmap[n / 8] |= std::uint8_t(1u << (n % 8));
  }
  os.write(reinterpret_cast<const char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));

  if (!os) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

C2GImage read_c2g(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open for reading: " + path.string());

  binio::check_magic(is, kMagic, path.string());
  std::uint8_t version = binio::get_u8(is);
  if (version != kVersion) {
    throw Error(ErrorCode::BadMagic, path.string() + ": unsupported container version " + std::to_string(version));
  }

  C2GImage img;
  img.spec.kx = binio::get_u32(is);
  img.spec.ky = binio::get_u32(is);
  img.spec.channels = binio::get_u32(is);
  img.spec.d_um = binio::get_f64(is);
  img.meta.objects_kept = binio::get_u32(is);
  img.meta.objects_deleted = binio::get_u32(is);
  std::uint16_t id_len = binio::get_u16(is);
  img.meta.source_id.resize(id_len);
  if (id_len > 0) {
    is.read(img.meta.source_id.data(), id_len);
    if (is.gcount() != id_len) throw Error(ErrorCode::TruncatedFile, path.string() + ": source id truncated");
  }

  if (img.spec.kx == 0 || img.spec.ky == 0) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": zero grid dimension in header");
  }
  // 256M values caps the allocation at 1 GiB and rejects nonsense headers.
  if (img.spec.values() > (std::size_t(1) << 28)) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": header dimensions implausibly large");
  }

  img.data.resize(img.spec.values());
  binio::get_f32_block(is, img.data.data(), img.data.size());

  const std::size_t nodes = img.spec.nodes();
  std::vector<std::uint8_t> bitmap((nodes + 7) / 8);
  is.read(reinterpret_cast<char*>(bitmap.data()), static_cast<std::streamsize>(bitmap.size()));
  if (static_cast<std::size_t>(is.gcount()) != bitmap.size()) {
    throw Error(ErrorCode::TruncatedFile, path.string() + ": occupancy bitmap truncated");
  }
  img.occupancy.resize(nodes);
  for (std::size_t n = 0; n < nodes; ++n) {
    img.occupancy[n] = (bitmap[n / 8] >> (n % 8)) & 1u;
  }

  // Trailing bytes mean the header and payload disagree about dimensions.
  if (is.peek() != std::ifstream::traits_type::eof()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes after payload");
  }

  img.validate();
  return img;
}

}  // namespace c2g

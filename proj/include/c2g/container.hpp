#pragma once

// The C2G binary container, the format of record for compressed images.
//
//   offset  size  field
//   0       16    magic "C2GRID-CONTAINER"
//   16      1     version (1)
//   17      4     kx   (u32 LE)
//   21      4     ky   (u32 LE)
//   25      4     P    (u32 LE, channels)
//   29      8     d_um (f64 LE, grid spacing)
//   37      4     objects kept    (u32 LE)
//   41      4     objects deleted (u32 LE)
//   45      2     source id length (u16 LE)
//   47      n     source id bytes (UTF-8)
//   ...           payload: kx*ky*P float32 LE, value (ix,iy,c) at
//                 index (ix*ky + iy)*P + c
//   ...           occupancy bitmap: ceil(kx*ky/8) bytes; node ix*ky+iy is
//                 bit (n % 8) of byte (n / 8), LSB first
//
// Everything is little-endian; any language reads the file with no image
// library involved. The round trip is bit-exact.

#include <filesystem>

#include "c2g/types.hpp"

namespace c2g {

void write_c2g(const C2GImage& img, const std::filesystem::path& path);
C2GImage read_c2g(const std::filesystem::path& path);

}  // namespace c2g

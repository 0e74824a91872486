#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "c2g/types.hpp"

namespace c2g {

/// False-color preview: three channels mapped to R,G,B, min-max scaled per
/// channel, one display pixel per grid node. Written as binary PPM (P6),
/// row 0 = iy 0 (y grows downward).
void export_preview(const C2GImage& img, const std::array<std::uint32_t, 3>& channel_map,
                    const std::filesystem::path& path);

/// Raw 8-bit RGB raster writer shared by preview and weight heatmaps.
void write_ppm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& rgb);

/// Convenience multi-channel TIFF (uncompressed float32 samples, one strip).
/// The binary container remains the format of record.
void export_tiff(const C2GImage& img, const std::filesystem::path& path);

}  // namespace c2g

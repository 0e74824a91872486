#pragma once

#include <cstdint>
#include <vector>

#include "c2g/rng.hpp"
#include "c2g/types.hpp"

namespace c2g {

/// Training-time augmentation settings. Defaults reproduce the standard
/// recipe for 135x101 grid images.
struct AugmentConfig {
  double translate_p = 1.0;
  int translate_max_dx = 30;
  int translate_max_dy = 20;

  double reflect_p = 1.0;

  double rotate_p = 1.0;  // k*90 degrees, k drawn from {0,1,2,3}

  double blackout_p = 0.8;
  std::uint32_t blackout_w = 25;
  std::uint32_t blackout_h = 25;

  double shuffle_p = 1.0;
  std::uint32_t shuffle_count = 50;
  std::uint32_t shuffle_w = 3;
  std::uint32_t shuffle_h = 3;

  double channel_brightness_p = 0.1;  // gated per channel
  double channel_factor_lo = 0.9;
  double channel_factor_hi = 1.1;

  double global_brightness_p = 1.0;
  double global_factor_lo = 0.8;
  double global_factor_hi = 1.2;

  double delete_p = 1.0;
  std::uint32_t delete_count = 100;

  std::uint64_t rng_seed = 0;

  void validate() const;
  static AugmentConfig disabled();
};

namespace aug {

/// Shift content by (dx, dy) nodes. Vacated strips are filled by reflecting
/// the content across the image edge (edge row/column repeated); a strip
/// wider than the image falls back to zero fill beyond the first reflection.
C2GImage translate(const C2GImage& img, int dx, int dy);

C2GImage reflect(const C2GImage& img, bool flip_x, bool flip_y);

/// k*90 degree counterclockwise rotation (k taken mod 4). For odd k on a
/// non-square grid the rotated content is centered on the original kx x ky
/// canvas: the long axis is cropped, the short axis zero-padded.
C2GImage rotate90(const C2GImage& img, int k);

/// Zeroes the window with lower-left node (x0, y0), clipped at the borders.
void blackout(C2GImage& img, std::int64_t x0, std::int64_t y0, std::uint32_t w, std::uint32_t h);

/// Rearranges the pixel vectors of a fully-inside window according to perm
/// (perm[i] = source slot for destination slot i, slots in x-major order).
void permute_window(C2GImage& img, std::int64_t x0, std::int64_t y0, std::uint32_t w,
                    std::uint32_t h, const std::vector<std::uint32_t>& perm);

void scale_channel(C2GImage& img, std::uint32_t channel, float factor);
void scale_all(C2GImage& img, float factor);

/// Zeroes the given nodes (flat index ix*ky+iy) and clears their occupancy.
void delete_nodes(C2GImage& img, const std::vector<std::uint64_t>& nodes);

}  // namespace aug

/// Applies every configured method in fixed order: translate, reflect,
/// rotate, blackout, local shuffle, channel brightness, global brightness,
/// delete pixels. Each method consumes exactly one gate draw from rng
/// (channel brightness: one per channel); parameter draws happen only when
/// the gate fires, so outputs are reproducible from (img, cfg, seed).
C2GImage augment(const C2GImage& img, const AugmentConfig& cfg, Rng& rng);

/// Convenience wrapper seeding a fresh Rng from cfg.rng_seed.
C2GImage augment_seeded(const C2GImage& img, const AugmentConfig& cfg);

}  // namespace c2g

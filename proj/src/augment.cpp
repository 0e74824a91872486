#include "c2g/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2g/error.hpp"

namespace c2g {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::UsageError, what);
}

void check_prob(double p, const char* what) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, what);
}

void check_range(double lo, double hi, const char* what) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && lo <= hi, what);
}

void copy_node(const C2GImage& src, std::size_t si, C2GImage& dst, std::size_t di) {
  const std::uint32_t p = src.spec.channels;
  std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(si * p), p,
              dst.data.begin() + static_cast<std::ptrdiff_t>(di * p));
  dst.occupancy[di] = src.occupancy[si];
}

// Maps an out-of-range coordinate back inside by one reflection across the
// nearer edge (edge pixel repeated). Returns -1 when one reflection is not
// enough.
std::int64_t reflect_index(std::int64_t v, std::int64_t n) {
  if (v < 0) v = -v - 1;
  else if (v >= n) v = 2 * n - 1 - v;
  return (v >= 0 && v < n) ? v : -1;
}

std::int64_t floordiv2(std::int64_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

}  // namespace

void AugmentConfig::validate() const {
  check_prob(translate_p, "translate probability out of [0,1]");
  check_prob(reflect_p, "reflect probability out of [0,1]");
  check_prob(rotate_p, "rotate probability out of [0,1]");
  check_prob(blackout_p, "blackout probability out of [0,1]");
  check_prob(shuffle_p, "shuffle probability out of [0,1]");
  check_prob(channel_brightness_p, "channel brightness probability out of [0,1]");
  check_prob(global_brightness_p, "global brightness probability out of [0,1]");
  check_prob(delete_p, "delete probability out of [0,1]");
  require(translate_max_dx >= 0 && translate_max_dy >= 0, "translation bounds must be >= 0");
  require(blackout_w >= 1 && blackout_h >= 1, "blackout window must be positive");
  require(shuffle_w >= 1 && shuffle_h >= 1, "shuffle window must be positive");
  check_range(channel_factor_lo, channel_factor_hi, "channel brightness range must be ordered");
  check_range(global_factor_lo, global_factor_hi, "global brightness range must be ordered");
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig cfg;
  cfg.translate_p = 0.0;
  cfg.reflect_p = 0.0;
  cfg.rotate_p = 0.0;
  cfg.blackout_p = 0.0;
  cfg.shuffle_p = 0.0;
  cfg.channel_brightness_p = 0.0;
  cfg.global_brightness_p = 0.0;
  cfg.delete_p = 0.0;
  return cfg;
}

namespace aug {

C2GImage translate(const C2GImage& img, int dx, int dy) {
  const std::int64_t w = img.spec.kx, h = img.spec.ky;
  C2GImage out = C2GImage::zeros(img.spec);
  out.meta = img.meta;
  for (std::int64_t x = 0; x < w; ++x) {
    for (std::int64_t y = 0; y < h; ++y) {
      std::int64_t sx = x - dx, sy = y - dy;
      if (sx < 0 || sx >= w) sx = reflect_index(sx, w);
      if (sy < 0 || sy >= h) sy = reflect_index(sy, h);
      if (sx < 0 || sy < 0) continue;
      copy_node(img, img.node_index(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy)),
                out, out.node_index(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
    }
  }
  return out;
}

C2GImage reflect(const C2GImage& img, bool flip_x, bool flip_y) {
  const std::size_t w = img.spec.kx, h = img.spec.ky;
  C2GImage out = C2GImage::zeros(img.spec);
  out.meta = img.meta;
  for (std::size_t x = 0; x < w; ++x) {
    const std::size_t sx = flip_x ? w - 1 - x : x;
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = flip_y ? h - 1 - y : y;
      copy_node(img, img.node_index(sx, sy), out, out.node_index(x, y));
    }
  }
  return out;
}

C2GImage rotate90(const C2GImage& img, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  const std::int64_t w = img.spec.kx, h = img.spec.ky;
  C2GImage out = C2GImage::zeros(img.spec);
  out.meta = img.meta;
  if (k == 2) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t y = 0; y < h; ++y) {
        copy_node(img,
                  img.node_index(static_cast<std::size_t>(w - 1 - x),
                                 static_cast<std::size_t>(h - 1 - y)),
                  out, out.node_index(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
      }
    }
    return out;
  }
  // Odd k: rotated content has dims (h, w); center it on the w x h canvas.
  const std::int64_t offx = floordiv2(w - h), offy = floordiv2(h - w);
  for (std::int64_t x = 0; x < w; ++x) {
    const std::int64_t rx = x - offx;
    if (rx < 0 || rx >= h) continue;
    for (std::int64_t y = 0; y < h; ++y) {
      const std::int64_t ry = y - offy;
      if (ry < 0 || ry >= w) continue;
      const std::int64_t sx = (k == 1) ? w - 1 - ry : ry;
      const std::int64_t sy = (k == 1) ? rx : h - 1 - rx;
      copy_node(img, img.node_index(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy)),
                out, out.node_index(static_cast<std::size_t>(x), static_cast<std::size_t>(y)));
    }
  }
  return out;
}

void blackout(C2GImage& img, std::int64_t x0, std::int64_t y0, std::uint32_t w, std::uint32_t h) {
  const std::int64_t kx = img.spec.kx, ky = img.spec.ky;
  const std::int64_t x1 = std::min<std::int64_t>(x0 + w, kx), y1 = std::min<std::int64_t>(y0 + h, ky);
  const std::uint32_t p = img.spec.channels;
  for (std::int64_t x = std::max<std::int64_t>(x0, 0); x < x1; ++x) {
    for (std::int64_t y = std::max<std::int64_t>(y0, 0); y < y1; ++y) {
      const std::size_t i =
          img.node_index(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      std::fill_n(img.data.begin() + static_cast<std::ptrdiff_t>(i * p), p, 0.0f);
      img.occupancy[i] = 0;
    }
  }
}

void permute_window(C2GImage& img, std::int64_t x0, std::int64_t y0, std::uint32_t w,
                    std::uint32_t h, const std::vector<std::uint32_t>& perm) {
  const std::int64_t kx = img.spec.kx, ky = img.spec.ky;
  if (x0 < 0 || y0 < 0 || x0 + w > kx || y0 + h > ky) {
    throw Error(ErrorCode::OutOfBounds, "shuffle window outside image");
  }
  if (perm.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorCode::DimensionMismatch, "permutation size does not match window");
  }
  const std::uint32_t p = img.spec.channels;
  const std::size_t slots = perm.size();
  std::vector<float> vals(slots * p);
  std::vector<std::uint8_t> occ(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t i = img.node_index(static_cast<std::size_t>(x0) + s / h,
                                         static_cast<std::size_t>(y0) + s % h);
    std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>(i * p), p, vals.begin() + s * p);
    occ[s] = img.occupancy[i];
  }
  for (std::size_t s = 0; s < slots; ++s) {
    const std::uint32_t src = perm[s];
    if (src >= slots) throw Error(ErrorCode::OutOfBounds, "permutation entry outside window");
    const std::size_t i = img.node_index(static_cast<std::size_t>(x0) + s / h,
                                         static_cast<std::size_t>(y0) + s % h);
    std::copy_n(vals.begin() + src * p, p, img.data.begin() + static_cast<std::ptrdiff_t>(i * p));
    img.occupancy[i] = occ[src];
  }
}

void scale_channel(C2GImage& img, std::uint32_t channel, float factor) {
  if (channel >= img.spec.channels) {
    throw Error(ErrorCode::BadChannelIndex, "channel index out of range");
  }
  const std::uint32_t p = img.spec.channels;
  for (std::size_t i = channel; i < img.data.size(); i += p) img.data[i] *= factor;
}

void scale_all(C2GImage& img, float factor) {
  for (float& v : img.data) v *= factor;
}

void delete_nodes(C2GImage& img, const std::vector<std::uint64_t>& nodes) {
  const std::uint32_t p = img.spec.channels;
  const std::uint64_t total = static_cast<std::uint64_t>(img.spec.kx) * img.spec.ky;
  for (std::uint64_t i : nodes) {
    if (i >= total) throw Error(ErrorCode::OutOfBounds, "node index out of range");
    std::fill_n(img.data.begin() + static_cast<std::ptrdiff_t>(i * p), p, 0.0f);
    img.occupancy[i] = 0;
  }
}

}  // namespace aug

C2GImage augment(const C2GImage& img, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  img.validate();
  const std::uint64_t w = img.spec.kx, h = img.spec.ky;
  if (cfg.shuffle_p > 0.0 && (cfg.shuffle_w > w || cfg.shuffle_h > h)) {
    throw Error(ErrorCode::WindowLargerThanImage, "shuffle window larger than image");
  }

  C2GImage cur = img;

  if (rng.u01() < cfg.translate_p) {
    const int dx = static_cast<int>(rng.uniform_int(-cfg.translate_max_dx, cfg.translate_max_dx));
    const int dy = static_cast<int>(rng.uniform_int(-cfg.translate_max_dy, cfg.translate_max_dy));
    if (dx != 0 || dy != 0) cur = aug::translate(cur, dx, dy);
  }

  if (rng.u01() < cfg.reflect_p) {
    const bool fx = rng.u01() < 0.5;
    const bool fy = rng.u01() < 0.5;
    if (fx || fy) cur = aug::reflect(cur, fx, fy);
  }

  if (rng.u01() < cfg.rotate_p) {
    const int k = static_cast<int>(rng.bounded(4));
    if (k != 0) cur = aug::rotate90(cur, k);
  }

  if (rng.u01() < cfg.blackout_p) {
    const std::int64_t x0 = static_cast<std::int64_t>(rng.bounded(w));
    const std::int64_t y0 = static_cast<std::int64_t>(rng.bounded(h));
    aug::blackout(cur, x0, y0, cfg.blackout_w, cfg.blackout_h);
  }

  if (rng.u01() < cfg.shuffle_p) {
    std::vector<std::uint32_t> perm(static_cast<std::size_t>(cfg.shuffle_w) * cfg.shuffle_h);
    for (std::uint32_t i = 0; i < cfg.shuffle_count; ++i) {
      const std::int64_t x0 = static_cast<std::int64_t>(rng.bounded(w - cfg.shuffle_w + 1));
      const std::int64_t y0 = static_cast<std::int64_t>(rng.bounded(h - cfg.shuffle_h + 1));
      std::iota(perm.begin(), perm.end(), 0u);
      rng.shuffle(perm);
      aug::permute_window(cur, x0, y0, cfg.shuffle_w, cfg.shuffle_h, perm);
    }
  }

  for (std::uint32_t c = 0; c < img.spec.channels; ++c) {
    if (rng.u01() < cfg.channel_brightness_p) {
      const float f =
          static_cast<float>(rng.uniform_real(cfg.channel_factor_lo, cfg.channel_factor_hi));
      aug::scale_channel(cur, c, f);
    }
  }

  if (rng.u01() < cfg.global_brightness_p) {
    const float f =
        static_cast<float>(rng.uniform_real(cfg.global_factor_lo, cfg.global_factor_hi));
    aug::scale_all(cur, f);
  }

  if (rng.u01() < cfg.delete_p) {
    const std::uint64_t total = w * h;
    const std::uint64_t n = std::min<std::uint64_t>(cfg.delete_count, total);
    std::vector<std::uint64_t> pool(total);
    std::iota(pool.begin(), pool.end(), 0ull);
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t j = i + rng.bounded(total - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    aug::delete_nodes(cur, pool);
  }

  return cur;
}

C2GImage augment_seeded(const C2GImage& img, const AugmentConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return augment(img, cfg, rng);
}

}  // namespace c2g

#include "c2g/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "c2g/binio.hpp"
#include "c2g/error.hpp"

namespace c2g {

LayerSpec LayerSpec::conv(std::uint32_t kw, std::uint32_t kh, std::uint32_t filters,
                          Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.kw = kw;
  s.kh = kh;
  s.units = filters;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::maxpool(std::uint32_t w, std::uint32_t h, PoolMode mode) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.kw = w;
  s.kh = h;
  s.pool_mode = mode;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

LayerSpec LayerSpec::dense(std::uint32_t units) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.dropout_rate = rate;
  return s;
}

LayerSpec LayerSpec::softmax(std::uint32_t classes) {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  s.units = classes;
  return s;
}

void NetworkSpec::validate() const {
  if (!(l1_coefficient >= 0.0) || !std::isfinite(l1_coefficient)) {
    throw Error(ErrorCode::UsageError, "l1 coefficient must be finite and >= 0");
  }
  if (layers.empty()) throw Error(ErrorCode::ShapeMismatch, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i);
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.kw < 1 || l.kh < 1 || l.units < 1) {
          throw Error(ErrorCode::UsageError, where + ": conv kernel and filters must be positive");
        }
        break;
      case LayerKind::MaxPool:
        if (l.kw < 1 || l.kh < 1) {
          throw Error(ErrorCode::UsageError, where + ": pool window must be positive");
        }
        break;
      case LayerKind::Dense:
      case LayerKind::Softmax:
        if (l.units < 1) throw Error(ErrorCode::UsageError, where + ": units must be positive");
        break;
      case LayerKind::Dropout:
        if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
          throw Error(ErrorCode::UsageError, where + ": dropout rate must be in [0,1)");
        }
        break;
      case LayerKind::Flatten: break;
    }
  }
  if (layers.back().kind != LayerKind::Softmax) {
    throw Error(ErrorCode::ShapeMismatch, "last layer must be softmax");
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::Softmax) {
      throw Error(ErrorCode::ShapeMismatch, "softmax only allowed as the last layer");
    }
  }
  (void)shapes();
}

std::vector<Shape> NetworkSpec::shapes() const {
  if (input_x < 1 || input_y < 1 || input_c < 1) {
    throw Error(ErrorCode::ShapeUnderflow, "input plane has a zero dimension");
  }
  std::vector<Shape> out;
  Shape cur;
  cur.x = input_x;
  cur.y = input_y;
  cur.c = input_c;
  out.push_back(cur);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i);
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.flat) throw Error(ErrorCode::ShapeMismatch, where + ": conv on flat input");
        std::uint32_t nx = cur.x, ny = cur.y;
        if (l.padding == Padding::Valid) {
          if (cur.x < l.kw || cur.y < l.kh) {
            throw Error(ErrorCode::ShapeUnderflow, where + ": kernel larger than plane");
          }
          nx = cur.x - l.kw + 1;
          ny = cur.y - l.kh + 1;
        }
        cur = Shape{nx, ny, l.units, false, 0};
        break;
      }
      case LayerKind::MaxPool: {
        if (cur.flat) throw Error(ErrorCode::ShapeMismatch, where + ": pool on flat input");
        std::uint32_t nx, ny;
        if (l.pool_mode == PoolMode::Floor) {
          nx = cur.x / l.kw;
          ny = cur.y / l.kh;
          if (nx < 1 || ny < 1) {
            throw Error(ErrorCode::ShapeUnderflow, where + ": pool window larger than plane");
          }
        } else {
          nx = (cur.x + l.kw - 1) / l.kw;
          ny = (cur.y + l.kh - 1) / l.kh;
        }
        cur = Shape{nx, ny, cur.c, false, 0};
        break;
      }
      case LayerKind::Flatten: {
        if (cur.flat) throw Error(ErrorCode::ShapeMismatch, where + ": flatten on flat input");
        cur = Shape{0, 0, 0, true, static_cast<std::uint64_t>(cur.x) * cur.y * cur.c};
        break;
      }
      case LayerKind::Dense:
      case LayerKind::Softmax: {
        if (!cur.flat) {
          throw Error(ErrorCode::ShapeMismatch, where + ": dense layer needs a flat input");
        }
        cur = Shape{0, 0, 0, true, l.units};
        break;
      }
      case LayerKind::Dropout: break;
    }
    out.push_back(cur);
  }
  return out;
}

std::vector<std::uint64_t> NetworkSpec::param_counts() const {
  const auto sh = shapes();
  std::vector<std::uint64_t> counts(layers.size(), 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::Conv) {
      counts[i] = static_cast<std::uint64_t>(l.kw) * l.kh * sh[i].c * l.units + l.units;
    } else if (l.kind == LayerKind::Dense || l.kind == LayerKind::Softmax) {
      counts[i] = sh[i].features * l.units + l.units;
    }
  }
  return counts;
}

std::uint64_t NetworkSpec::total_params() const {
  const auto counts = param_counts();
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

NetworkSpec build_deeplnino(std::uint32_t input_x, std::uint32_t input_y, std::uint32_t channels,
                            std::uint32_t classes) {
  NetworkSpec net;
  net.input_x = input_x;
  net.input_y = input_y;
  net.input_c = channels;
  net.layers = {
      LayerSpec::conv(1, 1, 16),
      LayerSpec::conv(2, 2, 16),
      LayerSpec::maxpool(2, 2, PoolMode::Floor),
      LayerSpec::conv(3, 3, 16),
      LayerSpec::maxpool(3, 3, PoolMode::Floor),
      LayerSpec::conv(3, 3, 16),
      LayerSpec::maxpool(3, 3, PoolMode::Floor),
      LayerSpec::conv(3, 3, 16, Padding::Same),
      LayerSpec::maxpool(3, 3, PoolMode::Ceil),
      LayerSpec::conv(2, 2, 16, Padding::Same),
      LayerSpec::maxpool(2, 2, PoolMode::Floor),
      LayerSpec::flatten(),
      LayerSpec::dense(32),
      LayerSpec::dropout(0.33),
      LayerSpec::softmax(classes),
  };
  net.validate();
  return net;
}

NetworkSpec build_deepcnet(std::uint32_t l, std::uint32_t k, std::uint32_t input_x,
                           std::uint32_t input_y, std::uint32_t channels,
                           std::uint32_t dense_units, std::uint32_t classes) {
  if (l < 2) throw Error(ErrorCode::UsageError, "deepcnet needs at least 2 stages");
  if (k < 1) throw Error(ErrorCode::UsageError, "deepcnet growth factor must be positive");
  NetworkSpec net;
  net.input_x = input_x;
  net.input_y = input_y;
  net.input_c = channels;
  for (std::uint32_t n = 1; n <= l; ++n) {
    const std::uint32_t ks = (n == 1) ? 3 : 2;
    net.layers.push_back(LayerSpec::conv(ks, ks, n * k));
    net.layers.push_back(LayerSpec::maxpool(2, 2, PoolMode::Ceil));
  }
  net.layers.push_back(LayerSpec::flatten());
  net.layers.push_back(LayerSpec::dense(dense_units));
  net.layers.push_back(LayerSpec::softmax(classes));
  net.validate();
  return net;
}

namespace {

template <typename T>
void conv_forward(const T* in, std::uint32_t inx, std::uint32_t iny, std::uint32_t cin,
                  const T* w, const T* b, std::uint32_t kw, std::uint32_t kh, std::uint32_t nf,
                  std::uint32_t padx, std::uint32_t pady, std::uint32_t outx, std::uint32_t outy,
                  T* out) {
  for (std::uint32_t ox = 0; ox < outx; ++ox) {
    for (std::uint32_t oy = 0; oy < outy; ++oy) {
      T* o = out + (static_cast<std::size_t>(ox) * outy + oy) * nf;
      for (std::uint32_t f = 0; f < nf; ++f) o[f] = b[f];
      for (std::uint32_t dx = 0; dx < kw; ++dx) {
        const std::int64_t ix = static_cast<std::int64_t>(ox) + dx - padx;
        if (ix < 0 || ix >= inx) continue;
        for (std::uint32_t dy = 0; dy < kh; ++dy) {
          const std::int64_t iy = static_cast<std::int64_t>(oy) + dy - pady;
          if (iy < 0 || iy >= iny) continue;
          const T* a = in + (static_cast<std::size_t>(ix) * iny + iy) * cin;
          const T* wk = w + (static_cast<std::size_t>(dx) * kh + dy) * cin * nf;
          for (std::uint32_t ci = 0; ci < cin; ++ci) {
            const T v = a[ci];
            const T* wr = wk + static_cast<std::size_t>(ci) * nf;
            for (std::uint32_t f = 0; f < nf; ++f) o[f] += v * wr[f];
          }
        }
      }
      for (std::uint32_t f = 0; f < nf; ++f) o[f] = o[f] > T(0) ? o[f] : T(0);
    }
  }
}

template <typename T>
void conv_backward(const T* in, std::uint32_t inx, std::uint32_t iny, std::uint32_t cin,
                   const T* w, std::uint32_t kw, std::uint32_t kh, std::uint32_t nf,
                   std::uint32_t padx, std::uint32_t pady, std::uint32_t outx, std::uint32_t outy,
                   const T* dpre, T* dw, T* db, T* din) {
  for (std::uint32_t ox = 0; ox < outx; ++ox) {
    for (std::uint32_t oy = 0; oy < outy; ++oy) {
      const T* dp = dpre + (static_cast<std::size_t>(ox) * outy + oy) * nf;
      for (std::uint32_t f = 0; f < nf; ++f) db[f] += dp[f];
      for (std::uint32_t dx = 0; dx < kw; ++dx) {
        const std::int64_t ix = static_cast<std::int64_t>(ox) + dx - padx;
        if (ix < 0 || ix >= inx) continue;
        for (std::uint32_t dy = 0; dy < kh; ++dy) {
          const std::int64_t iy = static_cast<std::int64_t>(oy) + dy - pady;
          if (iy < 0 || iy >= iny) continue;
          const std::size_t in_off = (static_cast<std::size_t>(ix) * iny + iy) * cin;
          const std::size_t w_off = (static_cast<std::size_t>(dx) * kh + dy) * cin * nf;
          for (std::uint32_t ci = 0; ci < cin; ++ci) {
            const T v = in[in_off + ci];
            T* dwr = dw + w_off + static_cast<std::size_t>(ci) * nf;
            const T* wr = w + w_off + static_cast<std::size_t>(ci) * nf;
            T acc = 0;
            for (std::uint32_t f = 0; f < nf; ++f) {
              dwr[f] += v * dp[f];
              acc += wr[f] * dp[f];
            }
            if (din) din[in_off + ci] += acc;
          }
        }
      }
    }
  }
}

std::uint32_t pad_before(const LayerSpec& l, bool x_axis) {
  if (l.padding != Padding::Same) return 0;
  return ((x_axis ? l.kw : l.kh) - 1) / 2;
}

}  // namespace

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  shapes_ = spec_.shapes();
  counts_ = spec_.param_counts();
}

template <typename T>
std::uint64_t Network<T>::param_count() const {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

template <typename T>
ParamSet<T> Network<T>::zero_params() const {
  ParamSet<T> p;
  p.layers.resize(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) p.layers[i].assign(counts_[i], T(0));
  return p;
}

template <typename T>
ParamSet<T> Network<T>::init_params(Rng& rng) const {
  ParamSet<T> p = zero_params();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (counts_[i] == 0) continue;
    const auto& l = spec_.layers[i];
    double fan_in, fan_out;
    std::size_t nweights;
    if (l.kind == LayerKind::Conv) {
      const double rf = static_cast<double>(l.kw) * l.kh;
      fan_in = rf * shapes_[i].c;
      fan_out = rf * l.units;
      nweights = static_cast<std::size_t>(l.kw) * l.kh * shapes_[i].c * l.units;
    } else {
      fan_in = static_cast<double>(shapes_[i].features);
      fan_out = l.units;
      nweights = static_cast<std::size_t>(shapes_[i].features) * l.units;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t j = 0; j < nweights; ++j) {
      p.layers[i][j] = static_cast<T>(rng.uniform_real(-limit, limit));
    }
    // biases stay zero
  }
  return p;
}

template <typename T>
std::vector<T> Network<T>::forward(const std::vector<T>& input, const ParamSet<T>& params,
                                   bool training, Rng* rng, Cache* cache) const {
  if (input.size() != shapes_[0].size()) {
    throw Error(ErrorCode::ShapeMismatch, "input size does not match network plane");
  }
  if (params.layers.size() != spec_.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter set does not match network");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (params.layers[i].size() != counts_[i]) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " parameter size");
    }
  }
  const std::size_t nl = spec_.layers.size();
  Cache local;
  Cache& c = cache ? *cache : local;
  c.out.assign(nl, {});
  c.argmax.assign(nl, {});
  c.keep.assign(nl, {});
  c.logits.clear();

  const std::vector<T>* cur = &input;
  for (std::size_t i = 0; i < nl; ++i) {
    const auto& l = spec_.layers[i];
    const Shape& si = shapes_[i];
    const Shape& so = shapes_[i + 1];
    std::vector<T>& out = c.out[i];
    out.assign(so.size(), T(0));
    switch (l.kind) {
      case LayerKind::Conv: {
        const T* w = params.layers[i].data();
        const T* b = w + static_cast<std::size_t>(l.kw) * l.kh * si.c * l.units;
        conv_forward(cur->data(), si.x, si.y, si.c, w, b, l.kw, l.kh, l.units,
                     pad_before(l, true), pad_before(l, false), so.x, so.y, out.data());
        break;
      }
      case LayerKind::MaxPool: {
        auto& am = c.argmax[i];
        am.assign(so.size(), 0);
        for (std::uint32_t ox = 0; ox < so.x; ++ox) {
          const std::uint32_t x0 = ox * l.kw;
          const std::uint32_t x1 = std::min(x0 + l.kw, si.x);
          for (std::uint32_t oy = 0; oy < so.y; ++oy) {
            const std::uint32_t y0 = oy * l.kh;
            const std::uint32_t y1 = std::min(y0 + l.kh, si.y);
            for (std::uint32_t ch = 0; ch < si.c; ++ch) {
              T best = (*cur)[(static_cast<std::size_t>(x0) * si.y + y0) * si.c + ch];
              std::uint32_t bi =
                  static_cast<std::uint32_t>((static_cast<std::size_t>(x0) * si.y + y0) * si.c + ch);
              for (std::uint32_t px = x0; px < x1; ++px) {
                for (std::uint32_t py = y0; py < y1; ++py) {
                  const std::size_t idx = (static_cast<std::size_t>(px) * si.y + py) * si.c + ch;
                  if ((*cur)[idx] > best) {
                    best = (*cur)[idx];
                    bi = static_cast<std::uint32_t>(idx);
                  }
                }
              }
              const std::size_t oidx = (static_cast<std::size_t>(ox) * so.y + oy) * si.c + ch;
              out[oidx] = best;
              am[oidx] = bi;
            }
          }
        }
        break;
      }
      case LayerKind::Flatten: {
        out = *cur;
        break;
      }
      case LayerKind::Dense:
      case LayerKind::Softmax: {
        const std::size_t nin = si.features;
        const std::size_t nu = l.units;
        const T* w = params.layers[i].data();
        const T* b = w + nin * nu;
        for (std::size_t u = 0; u < nu; ++u) out[u] = b[u];
        for (std::size_t j = 0; j < nin; ++j) {
          const T v = (*cur)[j];
          const T* wr = w + j * nu;
          for (std::size_t u = 0; u < nu; ++u) out[u] += v * wr[u];
        }
        if (l.kind == LayerKind::Dense) {
          for (auto& v : out) v = v > T(0) ? v : T(0);
        } else {
          c.logits.assign(out.begin(), out.end());
          T zmax = out[0];
          for (auto v : out) zmax = std::max(zmax, v);
          T sum = 0;
          for (auto& v : out) {
            v = std::exp(v - zmax);
            sum += v;
          }
          for (auto& v : out) v /= sum;
        }
        break;
      }
      case LayerKind::Dropout: {
        if (training && l.dropout_rate > 0.0) {
          if (!rng) {
            throw Error(ErrorCode::UsageError, "training forward through dropout needs an rng");
          }
          auto& keep = c.keep[i];
          keep.assign(cur->size(), 1);
          const T scale = static_cast<T>(1.0 / (1.0 - l.dropout_rate));
          for (std::size_t j = 0; j < cur->size(); ++j) {
            if (rng->u01() < l.dropout_rate) {
              keep[j] = 0;
              out[j] = T(0);
            } else {
              out[j] = (*cur)[j] * scale;
            }
          }
        } else {
          out = *cur;
        }
        break;
      }
    }
    cur = &out;
  }
  return c.out.back();
}

template <typename T>
void Network<T>::backward(const std::vector<T>& input, const ParamSet<T>& params,
                          const Cache& cache, const std::vector<T>& dlogits,
                          ParamSet<T>& grads) const {
  const std::size_t nl = spec_.layers.size();
  if (grads.layers.size() != nl) {
    throw Error(ErrorCode::ShapeMismatch, "gradient set does not match network");
  }
  if (dlogits.size() != shapes_[nl].size()) {
    throw Error(ErrorCode::ShapeMismatch, "logit gradient size mismatch");
  }

  std::vector<T> dcur = dlogits;
  std::vector<T> dprev;
  for (std::size_t ii = nl; ii-- > 0;) {
    const auto& l = spec_.layers[ii];
    const Shape& si = shapes_[ii];
    const std::vector<T>& act_in = (ii == 0) ? input : cache.out[ii - 1];
    dprev.assign(si.size(), T(0));
    switch (l.kind) {
      case LayerKind::Softmax:
      case LayerKind::Dense: {
        // For dense layers dcur holds d(post-activation); mask through the
        // rectifier first. For softmax dcur is already d(logits).
        const std::size_t nin = si.features;
        const std::size_t nu = l.units;
        std::vector<T> dpre = dcur;
        if (l.kind == LayerKind::Dense) {
          const auto& post = cache.out[ii];
          for (std::size_t u = 0; u < nu; ++u) {
            if (!(post[u] > T(0))) dpre[u] = T(0);
          }
        }
        T* dw = grads.layers[ii].data();
        T* db = dw + nin * nu;
        const T* w = params.layers[ii].data();
        for (std::size_t u = 0; u < nu; ++u) db[u] += dpre[u];
        for (std::size_t j = 0; j < nin; ++j) {
          const T v = act_in[j];
          T* dwr = dw + j * nu;
          const T* wr = w + j * nu;
          T acc = 0;
          for (std::size_t u = 0; u < nu; ++u) {
            dwr[u] += v * dpre[u];
            acc += wr[u] * dpre[u];
          }
          dprev[j] = acc;
        }
        break;
      }
      case LayerKind::Conv: {
        const Shape& so = shapes_[ii + 1];
        const auto& post = cache.out[ii];
        std::vector<T> dpre = dcur;
        for (std::size_t j = 0; j < dpre.size(); ++j) {
          if (!(post[j] > T(0))) dpre[j] = T(0);
        }
        T* dw = grads.layers[ii].data();
        T* db = dw + static_cast<std::size_t>(l.kw) * l.kh * si.c * l.units;
        const T* w = params.layers[ii].data();
        conv_backward(act_in.data(), si.x, si.y, si.c, w, l.kw, l.kh, l.units,
                      pad_before(l, true), pad_before(l, false), so.x, so.y, dpre.data(), dw, db,
                      ii == 0 ? nullptr : dprev.data());
        break;
      }
      case LayerKind::MaxPool: {
        const auto& am = cache.argmax[ii];
        for (std::size_t j = 0; j < dcur.size(); ++j) dprev[am[j]] += dcur[j];
        break;
      }
      case LayerKind::Flatten: {
        dprev = dcur;
        break;
      }
      case LayerKind::Dropout: {
        const auto& keep = cache.keep[ii];
        if (keep.empty()) {
          dprev = dcur;
        } else {
          const T scale = static_cast<T>(1.0 / (1.0 - l.dropout_rate));
          for (std::size_t j = 0; j < dcur.size(); ++j) {
            dprev[j] = keep[j] ? dcur[j] * scale : T(0);
          }
        }
        break;
      }
    }
    dcur = std::move(dprev);
    dprev.clear();
  }
}

template <typename T>
double loss_and_grads(const Network<T>& net, const ParamSet<T>& params,
                      const std::vector<const LabeledExample<T>*>& batch,
                      const std::array<double, 2>& class_weights, double l1, bool training,
                      std::uint64_t seed, ParamSet<T>& grads) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty training batch");
  if (!(class_weights[0] > 0.0) || !(class_weights[1] > 0.0)) {
    throw Error(ErrorCode::UsageError, "class weights must be positive");
  }
  grads = net.zero_params();
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  typename Network<T>::Cache cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto* s = batch[i];
    if (s->label != 0 && s->label != 1) {
      throw Error(ErrorCode::OutOfBounds, "labels must be 0 or 1");
    }
    Rng rng(derive_seed(seed, i));
    const auto probs = net.forward(s->x, params, training, &rng, &cache);
    const auto& z = cache.logits;
    double zmax = static_cast<double>(z[0]);
    for (auto v : z) zmax = std::max(zmax, static_cast<double>(v));
    double lse = 0.0;
    for (auto v : z) lse += std::exp(static_cast<double>(v) - zmax);
    const double logp = static_cast<double>(z[s->label]) - zmax - std::log(lse);
    const double w = class_weights[static_cast<std::size_t>(s->label)];
    loss += -w * logp;

    std::vector<T> dz(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double target = (static_cast<int>(k) == s->label) ? 1.0 : 0.0;
      dz[k] = static_cast<T>(w / n * (static_cast<double>(probs[k]) - target));
    }
    net.backward(s->x, params, cache, dz, grads);
  }
  loss /= n;

  if (l1 > 0.0) {
    const auto& layers = net.spec().layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].kind != LayerKind::Conv) continue;
      const std::size_t nweights = static_cast<std::size_t>(layers[i].kw) * layers[i].kh *
                                   net.shapes()[i].c * layers[i].units;
      for (std::size_t j = 0; j < nweights; ++j) {
        const T w = params.layers[i][j];
        loss += l1 * std::abs(static_cast<double>(w));
        if (w > T(0)) grads.layers[i][j] += static_cast<T>(l1);
        else if (w < T(0)) grads.layers[i][j] -= static_cast<T>(l1);
      }
      break;  // first conv layer only
    }
  }
  return loss;
}

template <typename T>
AdadeltaState<T> AdadeltaState<T>::like(const ParamSet<T>& params, double rho, double eps) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(ErrorCode::UsageError, "rho must be in (0,1)");
  if (!(eps > 0.0)) throw Error(ErrorCode::UsageError, "eps must be positive");
  AdadeltaState<T> st;
  st.rho = rho;
  st.eps = eps;
  st.eg2.resize(params.layers.size());
  st.ed2.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    st.eg2[i].assign(params.layers[i].size(), T(0));
    st.ed2[i].assign(params.layers[i].size(), T(0));
  }
  return st;
}

template <typename T>
void adadelta_step(ParamSet<T>& params, const ParamSet<T>& grads, AdadeltaState<T>& state) {
  if (grads.layers.size() != params.layers.size() || state.eg2.size() != params.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  }
  const double rho = state.rho, eps = state.eps;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    if (grads.layers[i].size() != params.layers[i].size() ||
        state.eg2[i].size() != params.layers[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "optimizer layer " + std::to_string(i) + " mismatch");
    }
    for (std::size_t j = 0; j < params.layers[i].size(); ++j) {
      const double g = static_cast<double>(grads.layers[i][j]);
      double eg2 = rho * static_cast<double>(state.eg2[i][j]) + (1.0 - rho) * g * g;
      const double delta = -std::sqrt((static_cast<double>(state.ed2[i][j]) + eps) / (eg2 + eps)) * g;
      state.eg2[i][j] = static_cast<T>(eg2);
      state.ed2[i][j] =
          static_cast<T>(rho * static_cast<double>(state.ed2[i][j]) + (1.0 - rho) * delta * delta);
      params.layers[i][j] += static_cast<T>(delta);
    }
  }
}

namespace {
constexpr char kCheckpointMagic[17] = "C2GNETCHECKPOINT";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParamSet<float>& params) {
  spec.validate();
  const auto counts = spec.param_counts();
  if (params.layers.size() != counts.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter set does not match network spec");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (params.layers[i].size() != counts[i]) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " parameter size");
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  binio::put_magic(os, kCheckpointMagic);
  binio::put_u32(os, kCheckpointVersion);
  binio::put_u32(os, spec.input_x);
  binio::put_u32(os, spec.input_y);
  binio::put_u32(os, spec.input_c);
  binio::put_f64(os, spec.l1_coefficient);
  binio::put_u32(os, static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    binio::put_u8(os, static_cast<std::uint8_t>(l.kind));
    binio::put_u32(os, l.kw);
    binio::put_u32(os, l.kh);
    binio::put_u32(os, l.units);
    binio::put_u8(os, static_cast<std::uint8_t>(l.padding));
    binio::put_u8(os, static_cast<std::uint8_t>(l.pool_mode));
    binio::put_f64(os, l.dropout_rate);
  }
  for (const auto& layer : params.layers) {
    binio::put_u64(os, layer.size());
    binio::put_f32_block(os, layer.data(), layer.size());
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::pair<NetworkSpec, ParamSet<float>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binio::check_magic(is, kCheckpointMagic, path.string());
  const std::uint32_t version = binio::get_u32(is);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::BadMagic, path.string() + ": unsupported checkpoint version");
  }
  NetworkSpec spec;
  spec.input_x = binio::get_u32(is);
  spec.input_y = binio::get_u32(is);
  spec.input_c = binio::get_u32(is);
  spec.l1_coefficient = binio::get_f64(is);
  const std::uint32_t nl = binio::get_u32(is);
  if (nl == 0 || nl > 4096) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": implausible layer count");
  }
  spec.layers.resize(nl);
  for (auto& l : spec.layers) {
    const std::uint8_t kind = binio::get_u8(is);
    if (kind > static_cast<std::uint8_t>(LayerKind::Softmax)) {
      throw Error(ErrorCode::DimensionMismatch, path.string() + ": unknown layer kind");
    }
    l.kind = static_cast<LayerKind>(kind);
    l.kw = binio::get_u32(is);
    l.kh = binio::get_u32(is);
    l.units = binio::get_u32(is);
    const std::uint8_t padding = binio::get_u8(is);
    const std::uint8_t mode = binio::get_u8(is);
    if (padding > 1 || mode > 1) {
      throw Error(ErrorCode::DimensionMismatch, path.string() + ": bad layer flags");
    }
    l.padding = static_cast<Padding>(padding);
    l.pool_mode = static_cast<PoolMode>(mode);
    l.dropout_rate = binio::get_f64(is);
  }
  spec.validate();
  const auto counts = spec.param_counts();
  ParamSet<float> params;
  params.layers.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::uint64_t n = binio::get_u64(is);
    if (n != counts[i]) {
      throw Error(ErrorCode::DimensionMismatch,
                  path.string() + ": layer " + std::to_string(i) + " parameter count mismatch");
    }
    params.layers[i].resize(n);
    binio::get_f32_block(is, params.layers[i].data(), n);
  }
  is.peek();
  if (!is.eof()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": trailing bytes after parameters");
  }
  return {std::move(spec), std::move(params)};
}

template class Network<float>;
template class Network<double>;
template double loss_and_grads<float>(const Network<float>&, const ParamSet<float>&,
                                      const std::vector<const LabeledExample<float>*>&,
                                      const std::array<double, 2>&, double, bool, std::uint64_t,
                                      ParamSet<float>&);
template double loss_and_grads<double>(const Network<double>&, const ParamSet<double>&,
                                       const std::vector<const LabeledExample<double>*>&,
                                       const std::array<double, 2>&, double, bool, std::uint64_t,
                                       ParamSet<double>&);
template struct AdadeltaState<float>;
template struct AdadeltaState<double>;
template void adadelta_step<float>(ParamSet<float>&, const ParamSet<float>&, AdadeltaState<float>&);
template void adadelta_step<double>(ParamSet<double>&, const ParamSet<double>&,
                                    AdadeltaState<double>&);

}  // namespace c2g

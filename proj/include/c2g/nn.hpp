#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "c2g/rng.hpp"

namespace c2g {

enum class LayerKind : std::uint8_t { Conv, MaxPool, Flatten, Dense, Dropout, Softmax };
enum class Padding : std::uint8_t { Valid, Same };
/// Partial windows at the right/bottom edge: Floor drops them, Ceil keeps
/// them (clipped).
enum class PoolMode : std::uint8_t { Floor, Ceil };

struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  std::uint32_t kw = 0;       // kernel / window width
  std::uint32_t kh = 0;       // kernel / window height
  std::uint32_t units = 0;    // conv filters, dense units, or classes
  Padding padding = Padding::Valid;
  PoolMode pool_mode = PoolMode::Floor;
  double dropout_rate = 0.0;

  static LayerSpec conv(std::uint32_t kw, std::uint32_t kh, std::uint32_t filters,
                        Padding padding = Padding::Valid);
  static LayerSpec maxpool(std::uint32_t w, std::uint32_t h, PoolMode mode = PoolMode::Floor);
  static LayerSpec flatten();
  static LayerSpec dense(std::uint32_t units);
  static LayerSpec dropout(double rate);
  static LayerSpec softmax(std::uint32_t classes);
};

/// Either a spatial x*y*c activation plane or a flat feature vector.
struct Shape {
  std::uint32_t x = 0, y = 0, c = 0;
  bool flat = false;
  std::uint64_t features = 0;  // valid when flat

  std::uint64_t size() const {
    return flat ? features
                : static_cast<std::uint64_t>(x) * y * c;
  }
  bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
  std::uint32_t input_x = 0, input_y = 0, input_c = 0;
  std::vector<LayerSpec> layers;
  double l1_coefficient = 1e-3;  // applied to the first conv layer's weights

  void validate() const;
  /// Output shape after each layer; index 0 is the input plane.
  /// Throws ShapeUnderflow / ShapeMismatch when the stack does not compose.
  std::vector<Shape> shapes() const;
  std::vector<std::uint64_t> param_counts() const;  // per layer, 0 for stateless
  std::uint64_t total_params() const;
};

/// The compact 16-filter network-in-network stack: conv1x1(16), conv2x2(16),
/// pool2, conv3x3(16), pool3, conv3x3(16), pool3, conv3x3(16, same), pool3
/// (partial windows kept), conv2x2(16, same), pool2, flatten, dense(32),
/// dropout(0.33), softmax.
NetworkSpec build_deeplnino(std::uint32_t input_x, std::uint32_t input_y, std::uint32_t channels,
                            std::uint32_t classes = 2);

/// Reference architecture: l conv+pool stages (first conv 3x3, the rest 2x2,
/// stage n has n*k filters), then dense(dense_units) and softmax.
NetworkSpec build_deepcnet(std::uint32_t l, std::uint32_t k, std::uint32_t input_x,
                           std::uint32_t input_y, std::uint32_t channels,
                           std::uint32_t dense_units = 128, std::uint32_t classes = 2);

/// Per-layer parameter storage; parametric layers hold [weights..., biases...]
/// in one contiguous vector, stateless layers an empty one.
/// Conv weight layout: w[((dx*kh + dy)*cin + ci)*filters + f].
/// Dense/softmax weight layout: w[i*units + u].
template <typename T>
struct ParamSet {
  std::vector<std::vector<T>> layers;
};

template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::uint64_t param_count() const;

  ParamSet<T> zero_params() const;
  /// Glorot-uniform weights, zero biases.
  ParamSet<T> init_params(Rng& rng) const;

  struct Cache {
    std::vector<std::vector<T>> out;                  // post-activation per layer
    std::vector<std::vector<std::uint32_t>> argmax;   // pool layers: winning input index
    std::vector<std::vector<std::uint8_t>> keep;      // dropout layers: keep mask
    std::vector<T> logits;                            // softmax pre-activation
  };

  /// Returns class probabilities. rng is consulted only for dropout when
  /// training; cache may be null when no backward pass follows.
  std::vector<T> forward(const std::vector<T>& input, const ParamSet<T>& params, bool training,
                         Rng* rng, Cache* cache) const;

  /// Accumulates parameter gradients for one sample, starting from the
  /// gradient at the softmax logits. cache must come from forward() on the
  /// same (input, params, mask draw).
  void backward(const std::vector<T>& input, const ParamSet<T>& params, const Cache& cache,
                const std::vector<T>& dlogits, ParamSet<T>& grads) const;

 private:
  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<std::uint64_t> counts_;
};

template <typename T>
struct LabeledExample {
  std::vector<T> x;
  int label = 0;
};

/// Weighted mean cross entropy plus l1 * sum|first conv weights|; exact
/// gradients for every parameter (L1 subgradient at 0 taken as 0).
/// Dropout masks (when training) derive from (seed, sample index), so the
/// value is a deterministic function of params and the result can be
/// finite-difference checked. class_weights[k] scales the loss of samples
/// labeled k; the sum is divided by the raw batch size.
template <typename T>
double loss_and_grads(const Network<T>& net, const ParamSet<T>& params,
                      const std::vector<const LabeledExample<T>*>& batch,
                      const std::array<double, 2>& class_weights, double l1, bool training,
                      std::uint64_t seed, ParamSet<T>& grads);

template <typename T>
struct AdadeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<std::vector<T>> eg2;  // decayed mean of squared gradients
  std::vector<std::vector<T>> ed2;  // decayed mean of squared updates

  static AdadeltaState like(const ParamSet<T>& params, double rho = 0.95, double eps = 1e-6);
};

/// E[g2] += ...; delta = -RMS[d]/RMS[g] * g; E[d2] += ...; param += delta.
/// No learning rate beyond rho and eps.
template <typename T>
void adadelta_step(ParamSet<T>& params, const ParamSet<T>& grads, AdadeltaState<T>& state);

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParamSet<float>& params);
std::pair<NetworkSpec, ParamSet<float>> load_checkpoint(const std::filesystem::path& path);

extern template class Network<float>;
extern template class Network<double>;
extern template double loss_and_grads<float>(const Network<float>&, const ParamSet<float>&,
                                             const std::vector<const LabeledExample<float>*>&,
                                             const std::array<double, 2>&, double, bool,
                                             std::uint64_t, ParamSet<float>&);
extern template double loss_and_grads<double>(const Network<double>&, const ParamSet<double>&,
                                              const std::vector<const LabeledExample<double>*>&,
                                              const std::array<double, 2>&, double, bool,
                                              std::uint64_t, ParamSet<double>&);
extern template struct AdadeltaState<float>;
extern template struct AdadeltaState<double>;
extern template void adadelta_step<float>(ParamSet<float>&, const ParamSet<float>&,
                                          AdadeltaState<float>&);
extern template void adadelta_step<double>(ParamSet<double>&, const ParamSet<double>&,
                                           AdadeltaState<double>&);

}  // namespace c2g

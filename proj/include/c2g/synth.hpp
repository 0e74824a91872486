#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "c2g/rng.hpp"
#include "c2g/types.hpp"

namespace c2g {

/// One object kind: per-channel intensity distribution (normal truncated at
/// zero).
struct Phenotype {
  std::string name;
  std::vector<double> mean;    // one entry per channel
  std::vector<double> spread;  // one entry per channel, >= 0
};

struct PatternSpec {
  enum class Kind : std::uint8_t { Uniform, Clustered } kind = Kind::Uniform;
  std::uint32_t clusters = 8;  // parent points (clustered only)
  double radius_um = 25.0;     // normal offset scale around parents
};

/// Two-class generator with planted ground truth: classes differ only through
/// their phenotype mixtures and/or spatial patterns.
struct SynthSpec {
  double width_um = 672.0;
  double height_um = 504.0;
  double mean_objects = 4150.0;  // Poisson mean per image
  std::uint32_t channels = 6;
  std::vector<Phenotype> phenotypes;
  std::array<std::vector<double>, 2> mixtures;  // per class, one weight per phenotype
  std::array<PatternSpec, 2> patterns;
  std::uint64_t seed = 0;

  void validate() const;  // throws DegenerateSpec
};

/// Generates n_per_class labeled images per class (labels 0 and 1), i.i.d.
/// given the class. Object counts are Poisson, coordinates follow the class
/// pattern, properties are drawn per phenotype. Deterministic per spec.seed;
/// each image has its own derived seed stream.
std::vector<ObjectImage> generate(const SynthSpec& spec, std::uint32_t n_per_class);

/// Count arrivals of a unit-rate process until the mean is exceeded.
std::uint64_t poisson_draw(Rng& rng, double mean);

/// Normal(mean, spread) resampled until nonnegative (bounded retries, then
/// clamped to zero).
double truncated_normal(Rng& rng, double mean, double spread);

}  // namespace c2g

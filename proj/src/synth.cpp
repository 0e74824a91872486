#include "c2g/synth.hpp"

#include <cmath>

#include "c2g/error.hpp"

namespace c2g {

namespace {

void fail(const std::string& what) { throw Error(ErrorCode::DegenerateSpec, what); }

}  // namespace

void SynthSpec::validate() const {
  if (!(width_um > 0.0) || !(height_um > 0.0) || !std::isfinite(width_um) ||
      !std::isfinite(height_um)) {
    fail("image extent must be positive and finite");
  }
  if (!(mean_objects > 0.0) || !std::isfinite(mean_objects)) {
    fail("mean object count must be positive");
  }
  if (channels < 1) fail("at least one channel required");
  if (phenotypes.empty()) fail("at least one phenotype required");
  for (const auto& ph : phenotypes) {
    if (ph.mean.size() != channels || ph.spread.size() != channels) {
      fail("phenotype '" + ph.name + "' must define mean and spread per channel");
    }
    for (double m : ph.mean) {
      if (!std::isfinite(m)) fail("phenotype '" + ph.name + "' has a non-finite mean");
    }
    for (double s : ph.spread) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        fail("phenotype '" + ph.name + "' spreads must be >= 0");
      }
    }
  }
  for (int k = 0; k < 2; ++k) {
    const auto& mix = mixtures[static_cast<std::size_t>(k)];
    if (mix.size() != phenotypes.size()) {
      fail("class " + std::to_string(k) + " mixture must have one weight per phenotype");
    }
    double sum = 0.0;
    for (double w : mix) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        fail("class " + std::to_string(k) + " mixture weights must be >= 0");
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      fail("class " + std::to_string(k) + " mixture must sum to 1");
    }
    const auto& pat = patterns[static_cast<std::size_t>(k)];
    if (pat.kind == PatternSpec::Kind::Clustered) {
      if (pat.clusters < 1) fail("clustered pattern needs at least one cluster");
      if (!(pat.radius_um > 0.0) || !std::isfinite(pat.radius_um)) {
        fail("cluster radius must be positive");
      }
    }
  }
}

std::uint64_t poisson_draw(Rng& rng, double mean) {
  // Arrival times of a unit-rate Poisson process: count jumps until the
  // accumulated exponential spacings pass the mean.
  std::uint64_t n = 0;
  double acc = 0.0;
  for (;;) {
    acc += -std::log(1.0 - rng.u01());  // Exp(1), avoids log(0)
    if (acc >= mean) return n;
    ++n;
  }
}

double truncated_normal(Rng& rng, double mean, double spread) {
  if (spread == 0.0) return mean < 0.0 ? 0.0 : mean;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double v = rng.normal(mean, spread);
    if (v >= 0.0) return v;
  }
  return 0.0;
}

namespace {

ObjectRecord draw_object(Rng& rng, const SynthSpec& spec, const PatternSpec& pat,
                         const std::vector<ObjectRecord>& parents, std::size_t phenotype) {
  ObjectRecord obj;
  if (pat.kind == PatternSpec::Kind::Uniform || parents.empty()) {
    obj.x_um = rng.u01() * spec.width_um;
    obj.y_um = rng.u01() * spec.height_um;
  } else {
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      const auto& parent = parents[rng.bounded(parents.size())];
      const double x = parent.x_um + rng.normal(0.0, pat.radius_um);
      const double y = parent.y_um + rng.normal(0.0, pat.radius_um);
      if (x >= 0.0 && x < spec.width_um && y >= 0.0 && y < spec.height_um) {
        obj.x_um = x;
        obj.y_um = y;
        placed = true;
      }
    }
    if (!placed) {
      obj.x_um = rng.u01() * spec.width_um;
      obj.y_um = rng.u01() * spec.height_um;
    }
  }
  const auto& ph = spec.phenotypes[phenotype];
  obj.props.resize(spec.channels);
  for (std::uint32_t c = 0; c < spec.channels; ++c) {
    obj.props[c] = truncated_normal(rng, ph.mean[c], ph.spread[c]);
  }
  return obj;
}

std::size_t draw_phenotype(Rng& rng, const std::vector<double>& mixture) {
  const double u = rng.u01();
  double acc = 0.0;
  for (std::size_t i = 0; i < mixture.size(); ++i) {
    acc += mixture[i];
    if (u < acc) return i;
  }
  return mixture.size() - 1;
}

}  // namespace

std::vector<ObjectImage> generate(const SynthSpec& spec, std::uint32_t n_per_class) {
  spec.validate();
  std::vector<ObjectImage> out;
  out.reserve(static_cast<std::size_t>(n_per_class) * 2);
  for (int k = 0; k < 2; ++k) {
    const std::uint64_t class_base =
        derive_seed(spec.seed, k == 0 ? "class0" : "class1");
    const auto& pat = spec.patterns[static_cast<std::size_t>(k)];
    const auto& mix = spec.mixtures[static_cast<std::size_t>(k)];
    for (std::uint32_t i = 0; i < n_per_class; ++i) {
      Rng rng(derive_seed(class_base, i));
      ObjectImage img;
      img.width_um = spec.width_um;
      img.height_um = spec.height_um;
      img.resolution_um_per_px = 0.5;
      img.channels = spec.channels;
      img.label = k;
      img.id = "class" + std::to_string(k) + "_img" + std::to_string(i);

      std::vector<ObjectRecord> parents;
      if (pat.kind == PatternSpec::Kind::Clustered) {
        parents.resize(pat.clusters);
        for (auto& p : parents) {
          p.x_um = rng.u01() * spec.width_um;
          p.y_um = rng.u01() * spec.height_um;
        }
      }

      const std::uint64_t count = poisson_draw(rng, spec.mean_objects);
      img.objects.reserve(count);
      for (std::uint64_t j = 0; j < count; ++j) {
        const std::size_t ph = draw_phenotype(rng, mix);
        img.objects.push_back(draw_object(rng, spec, pat, parents, ph));
      }
      img.validate();
      out.push_back(std::move(img));
    }
  }
  return out;
}

}  // namespace c2g

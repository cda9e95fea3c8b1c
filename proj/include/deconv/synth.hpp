#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "deconv/kernels.hpp"
#include "deconv/noise.hpp"
#include "deconv/rng.hpp"

namespace deconv {

struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 1.0;
};

/// Gaussian mixture used to generate synthetic signal streams. Presets are
/// normally proper densities (weights summing to one); `raw` constructs a
/// preset with the weights taken verbatim, which is needed to reproduce the
/// bimodal preset exactly as published (its printed weights sum to 0.9, see
/// bimodal_preset below).
class MixturePreset {
 public:
  static MixturePreset from_components(std::vector<MixtureComponent> components) {
    MixturePreset preset(std::move(components));
    if (std::abs(preset.total_weight() - 1.0) > 1e-12)
      throw contract_error("mixture preset weights must sum to 1 within 1e-12");
    return preset;
  }

  static MixturePreset raw(std::vector<MixtureComponent> components) {
    return MixturePreset(std::move(components));
  }

  MixturePreset normalized() const {
    std::vector<MixtureComponent> comps = components_;
    const double total = total_weight();
    for (auto& c : comps) c.weight /= total;
    return MixturePreset(std::move(comps));
  }

  const std::vector<MixtureComponent>& components() const noexcept { return components_; }

  double total_weight() const {
    double s = 0.0;
    for (const auto& c : components_) s += c.weight;
    return s;
  }

  /// sum_c weight_c * phi(x | mean_c, variance_c). For raw presets with
  /// weights not summing to one this is the as-printed curve, not a density.
  double pdf(double x) const {
    double s = 0.0;
    for (const auto& c : components_) s += c.weight * kernel_pdf({c.mean, c.variance}, x);
    return s;
  }

 private:
  explicit MixturePreset(std::vector<MixtureComponent> components)
      : components_(std::move(components)) {
    if (components_.empty()) throw contract_error("mixture preset must be nonempty");
    for (const auto& c : components_) {
      if (!(c.weight > 0.0)) throw contract_error("mixture preset weights must be positive");
      validate_atom({c.mean, c.variance});
    }
  }

  std::vector<MixtureComponent> components_;
};

/// 0.3 N(-1, 2) + 0.7 N(3, 1.5).
inline MixturePreset unimodal_preset() {
  return MixturePreset::from_components({{0.3, -1.0, 2.0}, {0.7, 3.0, 1.5}});
}

/// 0.4 N(-2, 1) + 0.5 N(4, 1) as published, whose weights sum to 0.9 and do
/// not form a density. With renormalize (the default) the weights are scaled
/// to sum to one; with renormalize = false the preset carries the printed
/// weights so the as-printed curve can be reproduced.
inline MixturePreset bimodal_preset(bool renormalize = true) {
  auto raw = MixturePreset::raw({{0.4, -2.0, 1.0}, {0.5, 4.0, 1.0}});
  return renormalize ? raw.normalized() : raw;
}

/// 0.1 N(-3, .2) + 0.3 N(0, .1) + 0.2 N(2, .1) + 0.2 N(1, .1) + 0.2 N(4, .05).
inline MixturePreset multimodal_preset() {
  return MixturePreset::from_components(
      {{0.1, -3.0, 0.2}, {0.3, 0.0, 0.1}, {0.2, 2.0, 0.1}, {0.2, 1.0, 0.1}, {0.2, 4.0, 0.05}});
}

inline MixturePreset preset_by_name(const std::string& name, bool renormalize = true) {
  if (name == "unimodal") return unimodal_preset();
  if (name == "bimodal") return bimodal_preset(renormalize);
  if (name == "multimodal") return multimodal_preset();
  throw config_error("unknown preset '" + name + "' (expected unimodal, bimodal or multimodal)");
}

/// n i.i.d. signal draws: component chosen proportionally to the weights,
/// then one Gaussian draw. Pure function of (preset, n, generator state).
inline std::vector<double> sample_signal(const MixturePreset& preset, std::size_t n, Philox& rng) {
  const double total = preset.total_weight();
  std::vector<double> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.next_double() * total;
    double acc = 0.0;
    const MixtureComponent* chosen = &preset.components().back();
    for (const auto& c : preset.components()) {
      acc += c.weight;
      if (u <= acc) {
        chosen = &c;
        break;
      }
    }
    xs.push_back(chosen->mean + std::sqrt(chosen->variance) * rng.next_normal());
  }
  return xs;
}

struct Observation {
  double x = 0.0;
  double z = 0.0;
  double y = 0.0;
};

/// Componentwise y = x + z with independent signal and noise draws. All
/// three coordinates are returned so oracle tests can see the decomposition.
inline std::vector<Observation> generate_stream(const MixturePreset& preset,
                                                const NoiseModel& noise, std::size_t n,
                                                Philox& rng) {
  noise.validate();
  std::vector<Observation> stream;
  stream.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.next_double() * preset.total_weight();
    double acc = 0.0;
    const MixtureComponent* chosen = &preset.components().back();
    for (const auto& c : preset.components()) {
      acc += c.weight;
      if (u <= acc) {
        chosen = &c;
        break;
      }
    }
    const double x = chosen->mean + std::sqrt(chosen->variance) * rng.next_normal();
    const double z = noise_sample(noise, rng);
    stream.push_back({x, z, x + z});
  }
  return stream;
}

}  // namespace deconv

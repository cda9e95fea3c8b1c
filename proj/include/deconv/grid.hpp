#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deconv/errors.hpp"
#include "deconv/math.hpp"

namespace deconv {

/// One mixture-component parameter: a (mean, variance) pair for the
/// Gaussian signal kernel.
struct ThetaAtom {
  double mean = 0.0;
  double variance = 1.0;

  friend bool operator==(const ThetaAtom&, const ThetaAtom&) = default;
};

inline void validate_atom(const ThetaAtom& theta) {
  if (!std::isfinite(theta.mean)) throw domain_error("atom mean must be finite");
  if (!(theta.variance > 0.0) || !std::isfinite(theta.variance))
    throw domain_error("atom variance must be positive and finite");
}

/// Cartesian-product grid specification: uniform mean and variance ranges,
/// each given as (min, max, step). This is the form used in config files.
struct GridSpec {
  double mean_min = -10.0;
  double mean_max = 10.0;
  double mean_step = 0.5;
  double var_min = 0.25;
  double var_max = 4.0;
  double var_step = 0.25;

  static std::size_t axis_count(double lo, double hi, double step) {
    if (!(step > 0.0)) throw config_error("grid step must be positive");
    if (!(hi >= lo)) throw config_error("grid max must be >= min");
    const double span = (hi - lo) / step;
    const double rounded = std::round(span);
    if (std::abs(span - rounded) > 1e-6 * std::max(1.0, std::abs(span)))
      throw config_error("grid range is not an integer number of steps");
    return static_cast<std::size_t>(rounded) + 1;
  }

  std::size_t mean_count() const { return axis_count(mean_min, mean_max, mean_step); }
  std::size_t var_count() const { return axis_count(var_min, var_max, var_step); }
  std::size_t size() const { return mean_count() * var_count(); }
};

/// The finite parameter set the mixing distribution lives on. Atom order is
/// fixed at construction (row-major over (mean, variance) when built from a
/// GridSpec) and is part of the checkpoint contract. Per-atom constants for
/// the Gaussian kernel are precomputed here because every streaming update
/// touches the full grid.
class ParameterGrid {
 public:
  explicit ParameterGrid(std::vector<ThetaAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw contract_error("parameter grid must be nonempty");
    for (const auto& a : atoms_) validate_atom(a);
    check_distinct();
    sigma_.resize(atoms_.size());
    norm_.resize(atoms_.size());
    neg_half_inv_var_.resize(atoms_.size());
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
      sigma_[j] = std::sqrt(atoms_[j].variance);
      norm_[j] = kInvSqrt2Pi / sigma_[j];
      neg_half_inv_var_[j] = -0.5 / atoms_[j].variance;
    }
  }

  /// Row-major construction: for each mean in ascending order, all variances
  /// in ascending order.
  static ParameterGrid from_spec(const GridSpec& spec) {
    const std::size_t nm = spec.mean_count();
    const std::size_t nv = spec.var_count();
    std::vector<ThetaAtom> atoms;
    atoms.reserve(nm * nv);
    for (std::size_t i = 0; i < nm; ++i) {
      const double mean = spec.mean_min + static_cast<double>(i) * spec.mean_step;
      for (std::size_t j = 0; j < nv; ++j) {
        atoms.push_back({mean, spec.var_min + static_cast<double>(j) * spec.var_step});
      }
    }
    return ParameterGrid(std::move(atoms));
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<ThetaAtom>& atoms() const noexcept { return atoms_; }
  const ThetaAtom& atom(std::size_t j) const { return atoms_.at(j); }

  std::optional<std::size_t> find(const ThetaAtom& theta) const {
    for (std::size_t j = 0; j < atoms_.size(); ++j)
      if (atoms_[j] == theta) return j;
    return std::nullopt;
  }

  // Precomputed kernel constants, indexed like atoms().
  double sigma(std::size_t j) const noexcept { return sigma_[j]; }
  double kernel_norm(std::size_t j) const noexcept { return norm_[j]; }
  double neg_half_inv_var(std::size_t j) const noexcept { return neg_half_inv_var_[j]; }

 private:
  void check_distinct() const {
    std::vector<ThetaAtom> sorted = atoms_;
    std::sort(sorted.begin(), sorted.end(), [](const ThetaAtom& a, const ThetaAtom& b) {
      return a.mean != b.mean ? a.mean < b.mean : a.variance < b.variance;
    });
    for (std::size_t j = 1; j < sorted.size(); ++j)
      if (sorted[j] == sorted[j - 1]) throw contract_error("parameter grid atoms must be distinct");
  }

  std::vector<ThetaAtom> atoms_;
  std::vector<double> sigma_;
  std::vector<double> norm_;
  std::vector<double> neg_half_inv_var_;
};

/// Probability mass function over a ParameterGrid, stored in atom order.
/// Instances are valid by construction: nonnegative entries summing to one
/// within 1e-12 (checked with compensated summation).
class MixingPmf {
 public:
  static MixingPmf uniform(std::size_t size) {
    if (size == 0) throw contract_error("pmf size must be positive");
    return MixingPmf(std::vector<double>(size, 1.0 / static_cast<double>(size)), unchecked{});
  }

  static MixingPmf from_weights(std::vector<double> w) {
    MixingPmf pmf(std::move(w), unchecked{});
    pmf.validate();
    return pmf;
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t j) const { return w_[j]; }
  const std::vector<double>& weights() const noexcept { return w_; }
  std::span<const double> span() const noexcept { return w_; }

  double sum() const { return compensated_sum(w_); }

  double min_weight() const { return *std::min_element(w_.begin(), w_.end()); }

  void validate() const {
    if (w_.empty()) throw contract_error("pmf must be nonempty");
    for (double x : w_)
      if (!(x >= 0.0) || !std::isfinite(x)) throw contract_error("pmf weights must be nonnegative and finite");
    if (std::abs(sum() - 1.0) > 1e-12)
      throw contract_error("pmf weights must sum to 1 within 1e-12 (got " + std::to_string(sum()) + ")");
  }

  struct unchecked {};
  MixingPmf(std::vector<double> w, unchecked) : w_(std::move(w)) {}

 private:
  std::vector<double> w_;
};

/// Ordered x-values at which densities are reported.
class EvalGrid {
 public:
  explicit EvalGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw contract_error("eval grid must be nonempty");
    for (double x : points_)
      if (!std::isfinite(x)) throw contract_error("eval grid points must be finite");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i] > points_[i - 1])) throw contract_error("eval grid must be strictly increasing");
  }

  static EvalGrid linspace(double lo, double hi, std::size_t count) {
    if (count < 2) throw contract_error("eval grid needs at least 2 points");
    if (!(lo < hi)) throw contract_error("eval grid needs lo < hi");
    std::vector<double> pts(count);
    for (std::size_t i = 0; i < count; ++i)
      pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return EvalGrid(std::move(pts));
  }

  const std::vector<double>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<double> points_;
};

}  // namespace deconv

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "deconv/grid.hpp"
#include "deconv/kernels.hpp"
#include "deconv/math.hpp"
#include "deconv/quadrature.hpp"
#include "deconv/rng.hpp"

namespace deconv {

enum class NoiseFamily { laplace, gaussian };

/// Known additive-noise law: zero-mean Laplace or Gaussian, parameterized by
/// standard deviation in signal units. The Laplace scale is std_dev/sqrt(2),
/// so variance equals std_dev^2 in both families.
struct NoiseModel {
  NoiseFamily family = NoiseFamily::laplace;
  double std_dev = 1.0;

  void validate() const {
    if (!(std_dev > 0.0) || !std::isfinite(std_dev))
      throw domain_error("noise std_dev must be positive and finite");
  }

  double laplace_scale() const { return std_dev / kSqrt2; }

  std::string family_name() const { return family == NoiseFamily::laplace ? "laplace" : "gaussian"; }

  static NoiseFamily parse_family(const std::string& s) {
    if (s == "laplace") return NoiseFamily::laplace;
    if (s == "gaussian") return NoiseFamily::gaussian;
    throw config_error("unknown noise family '" + s + "' (expected laplace or gaussian)");
  }
};

/// Noise density f_Z(z).
inline double noise_pdf(const NoiseModel& noise, double z) {
  noise.validate();
  if (!std::isfinite(z)) throw domain_error("noise_pdf: z must be finite");
  if (noise.family == NoiseFamily::laplace) {
    const double b = noise.laplace_scale();
    return std::exp(-std::abs(z) / b) / (2.0 * b);
  }
  const double d = z / noise.std_dev;
  return kInvSqrt2Pi / noise.std_dev * std::exp(-0.5 * d * d);
}

/// One draw from f_Z. Laplace by inverse CDF, Gaussian by the standard
/// normal inverse-CDF transform; both fully determined by the generator.
inline double noise_sample(const NoiseModel& noise, Philox& rng) {
  noise.validate();
  if (noise.family == NoiseFamily::laplace) return rng.next_laplace(noise.laplace_scale());
  return noise.std_dev * rng.next_normal();
}

namespace detail {

/// Stable Gaussian-Laplace convolution. For X ~ N(mean, var) and Laplace
/// noise with rate lam = 1/scale, with t = y - mean:
///
///   k~(y) = (lam/4) [ e^{lam(lam var/2 - t)} erfc((lam var - t)/(sigma sqrt2))
///                   + e^{lam(lam var/2 + t)} erfc((lam var + t)/(sigma sqrt2)) ]
///
/// Each term is rewritten as e^{-t^2/(2 var)} erfcx(u) whenever the erfc
/// argument u is nonnegative, which removes the overflowing exp factors.
inline double gauss_laplace_conv(double t, double var, double sigma, double lam) {
  const double a = lam * var;
  const double inv_s2 = 1.0 / (sigma * kSqrt2);
  const double gauss = std::exp(-0.5 * t * t / var);
  double total = 0.0;
  for (double sign : {1.0, -1.0}) {
    const double u = (a + sign * t) * inv_s2;
    if (u >= 0.0) {
      total += gauss * erfcx(u);
    } else {
      total += std::exp(lam * (0.5 * a + sign * t)) * std::erfc(u);
    }
  }
  return 0.25 * lam * total;
}

}  // namespace detail

/// Convolved kernel k~(y | theta) = (f_Z * k(.|theta))(y) in closed form.
/// Gaussian noise adds variances; Laplace noise uses the scaled-erfc form
/// above, certified against numeric_convolution_oracle by the test suite.
inline double convolved_kernel_pdf(const NoiseModel& noise, const ThetaAtom& theta, double y) {
  noise.validate();
  validate_atom(theta);
  if (!std::isfinite(y)) throw domain_error("convolved_kernel_pdf: y must be finite");
  if (noise.family == NoiseFamily::gaussian) {
    return kernel_pdf({theta.mean, theta.variance + noise.std_dev * noise.std_dev}, y);
  }
  const double sigma = std::sqrt(theta.variance);
  return detail::gauss_laplace_conv(y - theta.mean, theta.variance, sigma, 1.0 / noise.laplace_scale());
}

/// Reference convolution by composite Simpson over z in [-12 sd, 12 sd].
/// Validation oracle only; never on the hot path. The node count is raised
/// to the next 4k+1 so the Laplace kink at z = 0 falls on a panel boundary.
inline double numeric_convolution_oracle(const NoiseModel& noise, const ThetaAtom& theta, double y,
                                         std::size_t nodes) {
  noise.validate();
  validate_atom(theta);
  if (nodes < 201) throw contract_error("numeric_convolution_oracle: nodes must be >= 201");
  std::size_t intervals = nodes - 1;
  if (intervals % 4 != 0) intervals += 4 - intervals % 4;
  const double r = 12.0 * noise.std_dev;
  return simpson([&](double z) { return kernel_pdf(theta, y - z) * noise_pdf(noise, z); }, -r, r,
                 intervals + 1);
}

/// Per-grid precomputation for evaluating a full likelihood row
/// k~(y | theta_j), j = 1..K, at one observation. Every streaming update
/// touches the whole row, so the per-atom constants are hoisted here.
class ConvolvedKernel {
 public:
  ConvolvedKernel(const ParameterGrid& grid, const NoiseModel& noise) : noise_(noise) {
    noise_.validate();
    const std::size_t k = grid.size();
    mean_.resize(k);
    if (noise.family == NoiseFamily::gaussian) {
      norm_.resize(k);
      neg_half_inv_var_.resize(k);
      const double nv = noise.std_dev * noise.std_dev;
      for (std::size_t j = 0; j < k; ++j) {
        const double total_var = grid.atom(j).variance + nv;
        mean_[j] = grid.atom(j).mean;
        norm_[j] = kInvSqrt2Pi / std::sqrt(total_var);
        neg_half_inv_var_[j] = -0.5 / total_var;
      }
    } else {
      lam_ = 1.0 / noise.laplace_scale();
      a_.resize(k);
      inv_s2_.resize(k);
      neg_half_inv_var_.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        mean_[j] = grid.atom(j).mean;
        a_[j] = lam_ * grid.atom(j).variance;
        inv_s2_[j] = 1.0 / (grid.sigma(j) * kSqrt2);
        neg_half_inv_var_[j] = -0.5 / grid.atom(j).variance;
      }
    }
  }

  const NoiseModel& noise() const noexcept { return noise_; }
  std::size_t size() const noexcept { return mean_.size(); }

  double operator()(std::size_t j, double y) const {
    const double t = y - mean_[j];
    if (noise_.family == NoiseFamily::gaussian) {
      return norm_[j] * std::exp(neg_half_inv_var_[j] * t * t);
    }
    const double gauss = std::exp(neg_half_inv_var_[j] * t * t);
    double total = 0.0;
    for (double sign : {1.0, -1.0}) {
      const double u = (a_[j] + sign * t) * inv_s2_[j];
      total += (u >= 0.0) ? gauss * erfcx(u) : std::exp(lam_ * (0.5 * a_[j] + sign * t)) * std::erfc(u);
    }
    return 0.25 * lam_ * total;
  }

  /// Fills out[j] = k~(y | theta_j) and returns the row maximum.
  double row(double y, std::span<double> out) const {
    double row_max = 0.0;
    for (std::size_t j = 0; j < size(); ++j) {
      out[j] = (*this)(j, y);
      row_max = std::max(row_max, out[j]);
    }
    return row_max;
  }

 private:
  NoiseModel noise_;
  double lam_ = 0.0;
  std::vector<double> mean_;
  std::vector<double> norm_;              // gaussian path
  std::vector<double> a_;                 // laplace path: lam * var
  std::vector<double> inv_s2_;            // laplace path: 1/(sigma sqrt2)
  std::vector<double> neg_half_inv_var_;  // both paths
};

}  // namespace deconv

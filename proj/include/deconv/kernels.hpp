#pragma once

#include <cmath>

#include "deconv/grid.hpp"
#include "deconv/math.hpp"

namespace deconv {

/// Gaussian signal-kernel density phi(x | mean, variance).
inline double kernel_pdf(const ThetaAtom& theta, double x) {
  validate_atom(theta);
  if (!std::isfinite(x)) throw domain_error("kernel_pdf: x must be finite");
  const double d = x - theta.mean;
  return kInvSqrt2Pi / std::sqrt(theta.variance) * std::exp(-0.5 * d * d / theta.variance);
}

/// d/dx of kernel_pdf: -(x - mean)/variance * phi(x | theta).
inline double kernel_pdf_deriv(const ThetaAtom& theta, double x) {
  validate_atom(theta);
  if (!std::isfinite(x)) throw domain_error("kernel_pdf_deriv: x must be finite");
  return -(x - theta.mean) / theta.variance * kernel_pdf(theta, x);
}

/// Mixture density sum_j pmf[j] * phi(x | atom_j).
inline double mixture_pdf(const ParameterGrid& grid, const MixingPmf& pmf, double x) {
  if (pmf.size() != grid.size()) throw contract_error("mixture_pdf: pmf/grid size mismatch");
  if (!std::isfinite(x)) throw domain_error("mixture_pdf: x must be finite");
  double sum = 0.0, comp = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double d = x - grid.atom(j).mean;
    const double term = pmf[j] * grid.kernel_norm(j) * std::exp(grid.neg_half_inv_var(j) * d * d);
    const double t = sum + term;
    comp += (std::abs(sum) >= term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// sup over x in [a,b] of |kernel_pdf_deriv(theta, x)|. The magnitude
/// s * exp(-s^2/(2 var)) / (sigma^3 sqrt(2 pi)), s = |x - mean|, peaks at
/// s = sigma, so the sup sits at the feasible s closest to sigma.
inline double kernel_deriv_sup(const ThetaAtom& theta, double a, double b) {
  validate_atom(theta);
  if (!(a < b)) throw contract_error("kernel_deriv_sup: requires a < b");
  const double sigma = std::sqrt(theta.variance);
  double s_lo, s_hi;
  if (theta.mean >= a && theta.mean <= b) {
    s_lo = 0.0;
    s_hi = std::max(b - theta.mean, theta.mean - a);
  } else if (theta.mean < a) {
    s_lo = a - theta.mean;
    s_hi = b - theta.mean;
  } else {
    s_lo = theta.mean - b;
    s_hi = theta.mean - a;
  }
  auto magnitude = [&](double s) {
    return s * std::exp(-0.5 * s * s / theta.variance) / (theta.variance * sigma * kSqrt2Pi);
  };
  if (sigma >= s_lo && sigma <= s_hi) return magnitude(sigma);
  return std::max(magnitude(s_lo), magnitude(s_hi));
}

/// k'(I): sup over [a,b] x Theta of |kernel_pdf_deriv|. Used as the slope
/// bound that floors the generalized inverse in the band machinery.
inline double grid_deriv_sup(const ParameterGrid& grid, double a, double b) {
  double sup = 0.0;
  for (const auto& theta : grid.atoms()) sup = std::max(sup, kernel_deriv_sup(theta, a, b));
  return sup;
}

}  // namespace deconv

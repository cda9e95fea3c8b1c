#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "deconv/errors.hpp"

namespace deconv {

/// Composite Simpson rule over [a,b] with an odd number of nodes.
template <typename F>
double simpson(F&& f, double a, double b, std::size_t nodes) {
  if (nodes < 3 || nodes % 2 == 0) throw contract_error("simpson: nodes must be odd and >= 3");
  if (!(a < b)) throw contract_error("simpson: requires a < b");
  const double h = (b - a) / static_cast<double>(nodes - 1);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i + 1 < nodes; ++i) {
    const double x = a + static_cast<double>(i) * h;
    sum += f(x) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

/// Composite trapezoid rule; used by test oracles where a method independent
/// of the Simpson path is wanted.
template <typename F>
double trapezoid(F&& f, double a, double b, std::size_t nodes) {
  if (nodes < 2) throw contract_error("trapezoid: nodes must be >= 2");
  if (!(a < b)) throw contract_error("trapezoid: requires a < b");
  const double h = (b - a) / static_cast<double>(nodes - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i + 1 < nodes; ++i) sum += f(a + static_cast<double>(i) * h);
  return sum * h;
}

/// Simpson nodes and weights on [a,b], for integrands that are evaluated
/// once and reused across many integrals.
struct SimpsonGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  SimpsonGrid(double a, double b, std::size_t n) {
    if (n < 3 || n % 2 == 0) throw contract_error("SimpsonGrid: nodes must be odd and >= 3");
    if (!(a < b)) throw contract_error("SimpsonGrid: requires a < b");
    const double h = (b - a) / static_cast<double>(n - 1);
    nodes.resize(n);
    weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = a + static_cast<double>(i) * h;
      weights[i] = (i == 0 || i + 1 == n) ? h / 3.0 : (i % 2 == 1 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    }
  }
};

/// Integrates f over (0, upper] on a mesh geometrically refined toward 0.
/// Intended for integrable endpoint singularities of logarithmic type: the
/// mesh reaches down to upper*2^-40 and the remaining sliver is closed with
/// a one-point rectangle.
template <typename F>
double graded_integral(F&& f, double upper, std::size_t nodes) {
  if (upper <= 0.0) return 0.0;
  if (nodes < 8) throw contract_error("graded_integral: nodes must be >= 8");
  const double z_min = upper * 0x1p-40;
  const double ratio = std::pow(z_min / upper, 1.0 / static_cast<double>(nodes - 1));
  double total = 0.0;
  double z_hi = upper;
  double f_hi = f(z_hi);
  for (std::size_t i = 1; i < nodes; ++i) {
    const double z_lo = upper * std::pow(ratio, static_cast<double>(i));
    const double f_lo = f(z_lo);
    total += 0.5 * (f_lo + f_hi) * (z_hi - z_lo);
    z_hi = z_lo;
    f_hi = f_lo;
  }
  total += f_hi * z_hi;  // [0, z_min] sliver
  return total;
}

}  // namespace deconv

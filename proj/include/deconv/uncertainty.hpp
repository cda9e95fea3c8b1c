#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "deconv/engine.hpp"
#include "deconv/math.hpp"
#include "deconv/quadrature.hpp"

namespace deconv {

/// Tolerance for the y-window mass check: the predictive density integrated
/// over the window must reach 1 - 1e-8, otherwise the window is rejected.
inline constexpr double kWindowMassTol = 1e-8;

/// Truncation window and node counts for the y-integrals and for the
/// entropy integral of the band constant.
struct QuadratureSpec {
  double y_low = 0.0;
  double y_high = 0.0;
  std::size_t y_nodes = 801;
  std::size_t z_nodes = 256;

  void validate() const {
    if (!(y_low < y_high) || !std::isfinite(y_low) || !std::isfinite(y_high))
      throw contract_error("quadrature window must satisfy low < high and be finite");
    if (y_nodes < 401 || y_nodes % 2 == 0)
      throw contract_error("quadrature y_nodes must be odd and >= 401");
    if (z_nodes < 256) throw contract_error("quadrature z_nodes must be >= 256");
  }

  /// Default window: every atom's mean padded by `sigmas` combined standard
  /// deviations of kernel plus noise. The mass check decides whether this
  /// was wide enough for the state at hand.
  static QuadratureSpec for_state(const EstimatorState& state, double sigmas = 10.0,
                                  std::size_t y_nodes = 801, std::size_t z_nodes = 256) {
    const double noise_var = state.noise().std_dev * state.noise().std_dev;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& atom : state.grid().atoms()) {
      const double pad = sigmas * std::sqrt(atom.variance + noise_var);
      lo = std::min(lo, atom.mean - pad);
      hi = std::max(hi, atom.mean + pad);
    }
    QuadratureSpec spec{lo, hi, y_nodes, z_nodes};
    spec.validate();
    return spec;
  }
};

/// Closed interval I = [lo, hi] of the x-axis.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  void validate() const {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw contract_error("interval must satisfy lo < hi and be finite");
  }

  double length() const { return hi - lo; }
};

/// Conditional plug-in density f_n^(X)(x | y): the signal mixture under the
/// Bayes-reweighted pmf at observation y.
inline double cond_plugin_pdf(const EstimatorState& state, double x, double y) {
  return mixture_pdf(state.grid(), posterior_reweight(state, y), x);
}

namespace detail {

/// Shared y-quadrature context: Simpson nodes/weights over the window, the
/// predictive density at each node, and the mass check. Conditional plug-in
/// values over a probe set are produced as inner products against the
/// likelihood rows, so no transcendental is evaluated in the inner loop.
class YContext {
 public:
  YContext(const EstimatorState& state, const QuadratureSpec& quad)
      : grid_(quad.y_low, quad.y_high, quad.y_nodes), state_(&state) {
    quad.validate();
    const std::size_t n = grid_.nodes.size();
    const std::size_t k = state.grid().size();
    predictive_.resize(n);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
      state.likelihood().row(grid_.nodes[i], row);
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += state.pmf()[j] * row[j];
      predictive_[i] = s;
    }
    mass_ = 0.0;
    for (std::size_t i = 0; i < n; ++i) mass_ += grid_.weights[i] * predictive_[i];
    if (!(mass_ >= 1.0 - kWindowMassTol))
      throw window_mass_error(
          "y-window captured predictive mass " + std::to_string(mass_) +
              " < 1 - 1e-8; widen the quadrature window",
          mass_);
  }

  const std::vector<double>& nodes() const noexcept { return grid_.nodes; }
  const std::vector<double>& weights() const noexcept { return grid_.weights; }
  const std::vector<double>& predictive() const noexcept { return predictive_; }
  double mass() const noexcept { return mass_; }

  /// Matrix F with F[p][i] = f_n^(X)(x_p | y_i) for the probe points xs.
  /// Uses f_n^(X)(x|y) = sum_j k(x|theta_j) g_j k~(y_i|theta_j) / f_n^(Y)(y_i).
  std::vector<std::vector<double>> cond_matrix(const std::vector<double>& xs) const {
    const auto& st = *state_;
    const std::size_t k = st.grid().size();
    const std::size_t n = grid_.nodes.size();
    if (k == 1) {
      // A one-atom posterior is the same point mass for every y, so the
      // conditional density equals the plug-in density identically.
      std::vector<std::vector<double>> f(xs.size());
      for (std::size_t p = 0; p < xs.size(); ++p)
        f[p].assign(n, mixture_pdf(st.grid(), st.pmf(), xs[p]));
      return f;
    }
    // a[p][j] = k(x_p | theta_j) * pmf[j]
    std::vector<std::vector<double>> a(xs.size(), std::vector<double>(k));
    for (std::size_t p = 0; p < xs.size(); ++p) {
      for (std::size_t j = 0; j < k; ++j) {
        const double d = xs[p] - st.grid().atom(j).mean;
        a[p][j] = st.pmf()[j] * st.grid().kernel_norm(j) *
                  std::exp(st.grid().neg_half_inv_var(j) * d * d);
      }
    }
    std::vector<std::vector<double>> f(xs.size(), std::vector<double>(n));
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
      st.likelihood().row(grid_.nodes[i], row);
      if (!(predictive_[i] > 0.0))
        throw degenerate_error("predictive density vanished inside the quadrature window");
      const double inv = 1.0 / predictive_[i];
      for (std::size_t p = 0; p < xs.size(); ++p) {
        double s = 0.0;
        const auto& ap = a[p];
        for (std::size_t j = 0; j < k; ++j) s += ap[j] * row[j];
        f[p][i] = s * inv;
      }
    }
    return f;
  }

  /// Integral of (F[p] - center)^2 against the predictive measure.
  double centered_second_moment(const std::vector<double>& fp, double center) const {
    double s = 0.0;
    for (std::size_t i = 0; i < fp.size(); ++i) {
      const double d = fp[i] - center;
      s += grid_.weights[i] * d * d * predictive_[i];
    }
    return std::max(s, 0.0);
  }

 private:
  SimpsonGrid grid_;
  const EstimatorState* state_;
  std::vector<double> predictive_;
  double mass_ = 0.0;
};

}  // namespace detail

/// Pointwise variance v_n(x): the y-integral of the squared gap between the
/// conditional and marginal plug-in densities, under the predictive law.
inline double variance_vn(const EstimatorState& state, double x, const QuadratureSpec& quad) {
  detail::YContext ctx(state, quad);
  const auto f = ctx.cond_matrix({x});
  return ctx.centered_second_moment(f[0], plugin_pdf(state, x));
}

/// Pointwise credible interval f_n^(X)(x) +- b_n^(-1/2) z_{1-beta/2} max(v_n(x), eps)^(1/2).
struct IntervalResult {
  double x = 0.0;
  double center = 0.0;
  double half_width = 0.0;
  double variance = 0.0;
  double b_n = 0.0;
  double level = 0.0;  // beta
};

inline IntervalResult credible_interval(const EstimatorState& state, double x, double beta,
                                        double epsilon, const QuadratureSpec& quad) {
  if (!(beta > 0.0 && beta < 1.0)) throw contract_error("credible_interval: beta must lie in (0,1)");
  if (!(epsilon > 0.0)) throw contract_error("credible_interval: epsilon must be positive");
  if (state.count() == 0) throw contract_error("credible_interval: requires n >= 1");
  IntervalResult r;
  r.x = x;
  r.level = beta;
  r.center = plugin_pdf(state, x);
  r.variance = variance_vn(state, x, quad);
  r.b_n = variance_normalizer(state.schedule(), state.count());
  const double z = normal_quantile(1.0 - beta / 2.0);
  r.half_width = z * std::sqrt(std::max(r.variance, epsilon)) / std::sqrt(r.b_n);
  return r;
}

/// Batched intervals over an eval grid, sharing one y-quadrature context.
inline std::vector<IntervalResult> credible_intervals(const EstimatorState& state,
                                                      const EvalGrid& eval, double beta,
                                                      double epsilon, const QuadratureSpec& quad) {
  if (!(beta > 0.0 && beta < 1.0)) throw contract_error("credible_interval: beta must lie in (0,1)");
  if (!(epsilon > 0.0)) throw contract_error("credible_interval: epsilon must be positive");
  if (state.count() == 0) throw contract_error("credible_interval: requires n >= 1");
  detail::YContext ctx(state, quad);
  const auto f = ctx.cond_matrix(eval.points());
  const double b_n = variance_normalizer(state.schedule(), state.count());
  const double z = normal_quantile(1.0 - beta / 2.0);
  std::vector<IntervalResult> out(eval.size());
  for (std::size_t p = 0; p < eval.size(); ++p) {
    auto& r = out[p];
    r.x = eval.points()[p];
    r.level = beta;
    r.center = plugin_pdf(state, r.x);
    r.variance = ctx.centered_second_moment(f[p], r.center);
    r.b_n = b_n;
    r.half_width = z * std::sqrt(std::max(r.variance, epsilon)) / std::sqrt(b_n);
  }
  return out;
}

/// sigma_n(I): sup over an x-probe grid of sqrt(v_n(x)).
inline double sigma_sup(const EstimatorState& state, const Interval& interval,
                        const QuadratureSpec& quad, std::size_t x_probes = 201) {
  interval.validate();
  if (x_probes < 2) throw contract_error("sigma_sup: needs at least 2 probes");
  detail::YContext ctx(state, quad);
  std::vector<double> xs(x_probes);
  for (std::size_t p = 0; p < x_probes; ++p)
    xs[p] = interval.lo + interval.length() * static_cast<double>(p) / static_cast<double>(x_probes - 1);
  const auto f = ctx.cond_matrix(xs);
  double v_max = 0.0;
  for (std::size_t p = 0; p < x_probes; ++p)
    v_max = std::max(v_max, ctx.centered_second_moment(f[p], plugin_pdf(state, xs[p])));
  return std::sqrt(v_max);
}

/// Monotone tabulation of the modulus psi_n on the pair-probe lattice of an
/// interval, with the kernel-slope bound used to floor the generalized
/// inverse. z values are the lattice separations j*d, j = 0..P-1.
struct ModulusTable {
  std::vector<double> z;
  std::vector<double> psi;
  double deriv_bound = 0.0;  // k'(I)
  double length = 0.0;       // lambda(I)

  /// psi_n at an arbitrary z: sup over probe pairs at lattice separations
  /// strictly below z. psi[] is stored in prefix-max form, psi[m] covering
  /// separations up to m*d, so this returns psi at the largest lattice
  /// point below s.
  double value_at(double s) const {
    if (!(s > 0.0)) return 0.0;
    std::size_t m = 0;
    while (m + 1 < z.size() && z[m + 1] < s) ++m;
    return psi[m];
  }

  /// Generalized inverse inf{z : psi(z) > t} by scan plus linear
  /// interpolation, floored at t / k'(I). Returns the interval length when
  /// t is above the whole tabulation (inf over the empty set, by
  /// convention clamped to lambda(I)).
  double inverse(double t) const {
    if (!(t >= 0.0)) throw contract_error("psi_inv: t must be >= 0");
    std::size_t j = 0;
    while (j < psi.size() && !(psi[j] > t)) ++j;
    if (j == psi.size()) return length;
    if (j == 0) return 0.0;
    const double z_star =
        z[j - 1] + (t - psi[j - 1]) * (z[j] - z[j - 1]) / (psi[j] - psi[j - 1]);
    return std::max(z_star, t / deriv_bound);
  }
};

/// Builds the psi_n tabulation over `pair_probes` uniform probes of I.
/// psi entries are prefix maxima over pair separations, so the table is
/// nondecreasing by construction.
inline ModulusTable tabulate_modulus(const EstimatorState& state, const Interval& interval,
                                     const QuadratureSpec& quad, std::size_t pair_probes = 101) {
  interval.validate();
  if (pair_probes < 2) throw contract_error("tabulate_modulus: needs at least 2 pair probes");
  detail::YContext ctx(state, quad);
  const std::size_t p_count = pair_probes;
  const double d = interval.length() / static_cast<double>(p_count - 1);
  std::vector<double> xs(p_count);
  for (std::size_t p = 0; p < p_count; ++p) xs[p] = interval.lo + d * static_cast<double>(p);
  const auto f = ctx.cond_matrix(xs);
  std::vector<double> centers(p_count);
  for (std::size_t p = 0; p < p_count; ++p) centers[p] = plugin_pdf(state, xs[p]);

  // best2[m]: largest bracket over pairs at lattice separation m*d.
  std::vector<double> best2(p_count, 0.0);
  const auto& w = ctx.weights();
  const auto& pred = ctx.predictive();
  for (std::size_t m = 1; m < p_count; ++m) {
    double best = 0.0;
    for (std::size_t p = 0; p + m < p_count; ++p) {
      const auto& fa = f[p];
      const auto& fb = f[p + m];
      double integral = 0.0;
      for (std::size_t i = 0; i < fa.size(); ++i) {
        const double diff = fa[i] - fb[i];
        integral += w[i] * diff * diff * pred[i];
      }
      const double cd = centers[p] - centers[p + m];
      best = std::max(best, integral - cd * cd);
    }
    best2[m] = std::max(best, 0.0);  // quadrature noise can push the bracket below zero
  }

  // table.psi[j] estimates psi_n at z = j*d: the continuum sup admits pair
  // separations arbitrarily close to j*d from below, whose best lattice
  // proxy is the pair at separation j*d itself, so the prefix max includes
  // index j.
  ModulusTable table;
  table.length = interval.length();
  table.deriv_bound = grid_deriv_sup(state.grid(), interval.lo, interval.hi);
  table.z.resize(p_count);
  table.psi.resize(p_count);
  double running = 0.0;
  for (std::size_t j = 0; j < p_count; ++j) {
    table.z[j] = d * static_cast<double>(j);
    running = std::max(running, best2[j]);
    table.psi[j] = std::sqrt(running);
  }
  return table;
}

/// psi_n(state, I, z): single-z evaluation of the modulus.
inline double pair_modulus(const EstimatorState& state, const Interval& interval, double z,
                           const QuadratureSpec& quad, std::size_t pair_probes = 101) {
  interval.validate();
  if (!(z >= 0.0 && z <= interval.length() * (1.0 + 1e-12)))
    throw contract_error("pair_modulus: z must lie in [0, interval length]");
  const ModulusTable table = tabulate_modulus(state, interval, quad, pair_probes);
  return table.value_at(z);
}

/// Uniform band constant v_n(I, beta): twelve times the entropy integral of
/// the covering numbers implied by psi_n, plus the Gaussian tail term.
struct BandResult {
  Interval interval;
  double sigma_sup = 0.0;      // sigma_n(I)
  double band_constant = 0.0;  // v_n(I, beta)
  double level = 0.0;          // beta
  ModulusTable psi_table;
};

inline BandResult band_constant(const EstimatorState& state, const Interval& interval, double beta,
                                const QuadratureSpec& quad, std::size_t x_probes = 201,
                                std::size_t pair_probes = 101) {
  if (!(beta > 0.0 && beta < 1.0)) throw contract_error("band_constant: beta must lie in (0,1)");
  BandResult result;
  result.interval = interval;
  result.level = beta;
  result.sigma_sup = sigma_sup(state, interval, quad, x_probes);
  result.psi_table = tabulate_modulus(state, interval, quad, pair_probes);
  const double lambda_i = interval.length();
  const auto& table = result.psi_table;
  const double entropy = graded_integral(
      [&](double s) { return std::sqrt(std::log1p(lambda_i / (2.0 * table.inverse(0.5 * s)))); },
      result.sigma_sup, quad.z_nodes);
  const double tail = result.sigma_sup * std::sqrt(2.0 * std::abs(std::log(beta / 2.0)));
  result.band_constant = 12.0 * entropy + tail;
  return result;
}

struct BandPoint {
  double x = 0.0;
  double center = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Uniform credible band over an eval grid inside I: constant half-width
/// b_n^(-1/2) max(v_n(I,beta), eps) around the plug-in curve.
struct CredibleBand {
  BandResult info;
  double b_n = 0.0;
  double half_width = 0.0;
  std::vector<BandPoint> points;
};

inline CredibleBand credible_band(const EstimatorState& state, const Interval& interval,
                                  const EvalGrid& eval, double beta, double epsilon,
                                  const QuadratureSpec& quad, std::size_t x_probes = 201,
                                  std::size_t pair_probes = 101) {
  if (!(epsilon > 0.0)) throw contract_error("credible_band: epsilon must be positive");
  if (state.count() == 0) throw contract_error("credible_band: requires n >= 1");
  for (double x : eval.points())
    if (x < interval.lo || x > interval.hi)
      throw contract_error("credible_band: eval grid must lie inside the band interval");
  CredibleBand band;
  band.info = band_constant(state, interval, beta, quad, x_probes, pair_probes);
  band.b_n = variance_normalizer(state.schedule(), state.count());
  band.half_width = std::max(band.info.band_constant, epsilon) / std::sqrt(band.b_n);
  band.points.reserve(eval.size());
  for (double x : eval.points()) {
    const double c = plugin_pdf(state, x);
    band.points.push_back({x, c, c - band.half_width, c + band.half_width});
  }
  return band;
}

}  // namespace deconv

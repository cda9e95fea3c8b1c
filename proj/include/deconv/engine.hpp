#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deconv/grid.hpp"
#include "deconv/kernels.hpp"
#include "deconv/noise.hpp"

namespace deconv {

/// Learning-rate family (alpha/(alpha+n))^gamma with gamma in (1/2, 1].
/// gamma > 1/2 makes the squared rates summable while the rates themselves
/// diverge, which is what the streaming recursion needs.
struct LearningRateSchedule {
  double alpha = 1.0;
  double gamma = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw contract_error("schedule alpha must be positive and finite");
    if (!(gamma > 0.5 && gamma <= 1.0))
      throw contract_error("schedule gamma must lie in (1/2, 1]");
  }
};

/// Rate applied to the n-th observation (1-based).
inline double learning_rate(const LearningRateSchedule& s, std::uint64_t n) {
  s.validate();
  if (n == 0) throw contract_error("learning_rate: n must be >= 1");
  return std::pow(s.alpha / (s.alpha + static_cast<double>(n)), s.gamma);
}

/// CLT normalizer b_n = (2 gamma - 1) / alpha^(2 gamma) * n^(2 gamma - 1).
/// Interval and band half-widths scale as b_n^(-1/2).
inline double variance_normalizer(const LearningRateSchedule& s, std::uint64_t n) {
  s.validate();
  if (n == 0) throw contract_error("variance_normalizer: n must be >= 1");
  const double e = 2.0 * s.gamma - 1.0;
  return e / std::pow(s.alpha, 2.0 * s.gamma) * std::pow(static_cast<double>(n), e);
}

/// Full state of the streaming estimator: the parameter grid, the current
/// mixing pmf, the observation count, the learning-rate schedule and the
/// noise model. Checkpointable; single writer. Copies share the immutable
/// grid and likelihood tables, so passing snapshots between threads is
/// cheap.
class EstimatorState {
 public:
  EstimatorState(std::shared_ptr<const ParameterGrid> grid, MixingPmf g0,
                 LearningRateSchedule schedule, NoiseModel noise, std::uint64_t n = 0)
      : grid_(std::move(grid)),
        pmf_(std::move(g0)),
        n_(n),
        schedule_(schedule),
        noise_(noise),
        likelihood_(std::make_shared<ConvolvedKernel>(*grid_, noise_)) {
    schedule_.validate();
    noise_.validate();
    pmf_.validate();
    if (pmf_.size() != grid_->size())
      throw contract_error("estimator state: pmf size does not match grid size");
  }

  EstimatorState(ParameterGrid grid, MixingPmf g0, LearningRateSchedule schedule, NoiseModel noise,
                 std::uint64_t n = 0)
      : EstimatorState(std::make_shared<const ParameterGrid>(std::move(grid)), std::move(g0),
                       schedule, noise, n) {}

  /// Uniform g0 over the grid, the default initial guess.
  static EstimatorState with_uniform_prior(std::shared_ptr<const ParameterGrid> grid,
                                           LearningRateSchedule schedule, NoiseModel noise) {
    auto g0 = MixingPmf::uniform(grid->size());
    return EstimatorState(std::move(grid), std::move(g0), schedule, noise);
  }

  const ParameterGrid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const ParameterGrid>& grid_ptr() const noexcept { return grid_; }
  const MixingPmf& pmf() const noexcept { return pmf_; }
  std::uint64_t count() const noexcept { return n_; }
  const LearningRateSchedule& schedule() const noexcept { return schedule_; }
  const NoiseModel& noise() const noexcept { return noise_; }
  const ConvolvedKernel& likelihood() const noexcept { return *likelihood_; }

  /// Replaces the pmf and count together (used by the update operations).
  void replace(MixingPmf pmf, std::uint64_t n) {
    if (pmf.size() != grid_->size()) throw contract_error("estimator state: pmf size mismatch");
    pmf_ = std::move(pmf);
    n_ = n;
  }

 private:
  std::shared_ptr<const ParameterGrid> grid_;
  MixingPmf pmf_;
  std::uint64_t n_;
  LearningRateSchedule schedule_;
  NoiseModel noise_;
  std::shared_ptr<const ConvolvedKernel> likelihood_;
};

namespace detail {

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Bayes reweighting of `weights` by the likelihood row, which is divided by
/// its maximum first: the posterior is invariant under row scaling and the
/// division keeps products away from the underflow range.
inline std::vector<double> bayes_reweight(std::span<const double> weights,
                                          std::span<const double> row, double row_max,
                                          double observation) {
  if (!(row_max > 0.0) || !std::isfinite(row_max))
    throw degenerate_error("likelihood row degenerate (max " + format_value(row_max) +
                           ") at observation y = " + format_value(observation));
  const double inv_max = 1.0 / row_max;
  std::vector<double> post(weights.size());
  for (std::size_t j = 0; j < weights.size(); ++j) post[j] = weights[j] * (row[j] * inv_max);
  const double norm = compensated_sum(post);
  if (!(norm > 0.0))
    throw degenerate_error("posterior normalization underflowed at observation y = " +
                           format_value(observation));
  const double inv_norm = 1.0 / norm;
  for (double& p : post) p *= inv_norm;
  return post;
}

}  // namespace detail

/// Bayes-reweighted pmf g~_n(. | y) under the convolved kernel.
inline MixingPmf posterior_reweight(const EstimatorState& state, double y) {
  if (!std::isfinite(y)) throw domain_error("posterior_reweight: y must be finite");
  std::vector<double> row(state.grid().size());
  const double row_max = state.likelihood().row(y, row);
  return MixingPmf(detail::bayes_reweight(state.pmf().span(), row, row_max, y),
                   MixingPmf::unchecked{});
}

/// One streaming step: convex combination of the current pmf and its Bayes
/// reweighting, with weight learning_rate(n+1). O(K) time and memory,
/// independent of how many observations were absorbed before. Leaves the
/// state untouched if the reweighting fails.
inline void update_in_place(EstimatorState& state, double y) {
  MixingPmf post = posterior_reweight(state, y);
  const double rate = learning_rate(state.schedule(), state.count() + 1);
  std::vector<double> next(state.grid().size());
  const auto& cur = state.pmf();
  for (std::size_t j = 0; j < next.size(); ++j)
    next[j] = (1.0 - rate) * cur[j] + rate * post[j];
  state.replace(MixingPmf(std::move(next), MixingPmf::unchecked{}), state.count() + 1);
}

inline EstimatorState update(const EstimatorState& state, double y) {
  EstimatorState next = state;
  update_in_place(next, y);
  return next;
}

/// Predictive density f_n^(Y)(y) = sum_j k~(y | theta_j) g~_n(theta_j).
inline double predictive_pdf(const EstimatorState& state, double y) {
  if (!std::isfinite(y)) throw domain_error("predictive_pdf: y must be finite");
  const auto& lik = state.likelihood();
  std::vector<double> terms(state.grid().size());
  for (std::size_t j = 0; j < terms.size(); ++j) terms[j] = state.pmf()[j] * lik(j, y);
  return compensated_sum(terms);
}

/// Plug-in signal-density estimate f_n^(X)(x) = sum_j k(x | theta_j) g~_n(theta_j).
inline double plugin_pdf(const EstimatorState& state, double x) {
  return mixture_pdf(state.grid(), state.pmf(), x);
}

}  // namespace deconv

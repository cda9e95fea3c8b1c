#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "deconv/engine.hpp"
#include "deconv/rng.hpp"

namespace deconv {

/// Bayes reweighting under the signal kernel (the recursion one would run
/// if the noiseless observations were visible). Used by the calibration
/// simulation and by merging diagnostics.
inline MixingPmf signal_posterior_reweight(const ParameterGrid& grid, const MixingPmf& pmf,
                                           double x) {
  if (!std::isfinite(x)) throw domain_error("signal_posterior_reweight: x must be finite");
  if (pmf.size() != grid.size()) throw contract_error("signal_posterior_reweight: size mismatch");
  std::vector<double> row(grid.size());
  double row_max = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double d = x - grid.atom(j).mean;
    row[j] = grid.kernel_norm(j) * std::exp(grid.neg_half_inv_var(j) * d * d);
    row_max = std::max(row_max, row[j]);
  }
  return MixingPmf(detail::bayes_reweight(pmf.span(), row, row_max, x), MixingPmf::unchecked{});
}

/// One step of the signal-kernel recursion with rate schedule applied to the
/// 1-based observation index.
inline void signal_update_in_place(const ParameterGrid& grid, MixingPmf& pmf,
                                   const LearningRateSchedule& schedule, std::uint64_t index,
                                   double x) {
  MixingPmf post = signal_posterior_reweight(grid, pmf, x);
  const double rate = learning_rate(schedule, index);
  std::vector<double> next(grid.size());
  for (std::size_t j = 0; j < next.size(); ++j)
    next[j] = (1.0 - rate) * pmf[j] + rate * post[j];
  pmf = MixingPmf(std::move(next), MixingPmf::unchecked{});
}

/// Inputs of the learning-rate calibration: the gamma grid to score, the
/// simulation horizon M, the direct-recursion alpha, the parameter grid and
/// initial guess, the noise model and the master seed.
struct CalibrationConfig {
  std::vector<double> gamma_grid;
  std::uint64_t horizon = 1000;
  double alpha = 1.0;
  std::shared_ptr<const ParameterGrid> grid;
  MixingPmf g0 = MixingPmf::uniform(1);
  NoiseModel noise;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: use hardware concurrency

  static std::vector<double> default_gamma_grid(double step = 0.001) {
    std::vector<double> g;
    for (std::size_t i = 1;; ++i) {
      const double v = 0.5 + static_cast<double>(i) * step;
      if (v > 1.0 + 1e-12) break;
      g.push_back(std::min(v, 1.0));
    }
    return g;
  }

  void validate() const {
    if (!grid) throw contract_error("calibration config: missing parameter grid");
    if (gamma_grid.empty()) throw contract_error("calibration config: empty gamma grid");
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
      if (!(gamma_grid[i] > 0.5 && gamma_grid[i] <= 1.0))
        throw contract_error("calibration config: gamma values must lie in (1/2, 1]");
      if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1]))
        throw contract_error("calibration config: gamma grid must be strictly increasing");
    }
    if (horizon == 0) throw contract_error("calibration config: horizon must be >= 1");
    if (!(alpha > 0.0)) throw contract_error("calibration config: alpha must be positive");
    noise.validate();
    g0.validate();
    if (g0.size() != grid->size()) throw contract_error("calibration config: g0/grid size mismatch");
    if (!(g0.min_weight() > 0.0))
      throw contract_error("calibration config: g0 must be strictly positive");
  }
};

struct GammaScore {
  double gamma = 0.0;
  double score = 0.0;
  std::uint64_t skipped = 0;  // terms dropped because an update difference was exactly zero
};

struct CalibrationResult {
  double gamma_hat = 0.0;
  std::vector<GammaScore> objective;
};

namespace detail {

/// Draws an index from a pmf by inverting the CDF at one uniform variate.
inline std::size_t sample_index(const MixingPmf& pmf, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < pmf.size(); ++j) {
    acc += pmf[j];
    if (u <= acc) return j;
  }
  return pmf.size() - 1;  // u landed in the summation slack
}

/// Scores one gamma value by the coupled simulation: sample theta_i from the
/// current noisy pmf, draw X_i from its kernel and Z_i from the noise, then
/// advance the direct recursion on X_i (exponent 1) and the noisy recursion
/// on Y_i = X_i + Z_i (exponent gamma), accumulating the squared mismatch of
/// log update sizes against (1-gamma) log(1 + i/alpha).
inline GammaScore score_gamma(const CalibrationConfig& config, double gamma, Philox rng) {
  const ParameterGrid& grid = *config.grid;
  const ConvolvedKernel lik(grid, config.noise);
  const LearningRateSchedule direct_schedule{config.alpha, 1.0};
  const LearningRateSchedule noisy_schedule{config.alpha, gamma};

  MixingPmf direct = config.g0;
  MixingPmf noisy = config.g0;
  std::vector<double> row(grid.size());
  GammaScore out{gamma, 0.0, 0};

  for (std::uint64_t i = 1; i <= config.horizon; ++i) {
    const std::size_t theta_idx = sample_index(noisy, rng.next_double());
    const ThetaAtom& theta = grid.atom(theta_idx);
    const double x = theta.mean + std::sqrt(theta.variance) * rng.next_normal();
    const double z = noise_sample(config.noise, rng);
    const double y = x + z;

    const MixingPmf direct_post = signal_posterior_reweight(grid, direct, x);
    const double noisy_row_max = lik.row(y, row);
    const MixingPmf noisy_post =
        MixingPmf(bayes_reweight(noisy.span(), row, noisy_row_max, y), MixingPmf::unchecked{});

    const double direct_move = std::abs(direct_post[theta_idx] - direct[theta_idx]);
    const double noisy_move = std::abs(noisy_post[theta_idx] - noisy[theta_idx]);
    if (direct_move == 0.0 || noisy_move == 0.0) {
      ++out.skipped;
    } else {
      const double delta = std::log(direct_move) - std::log(noisy_move);
      const double target = (1.0 - gamma) * std::log1p(static_cast<double>(i) / config.alpha);
      const double term = delta - target;
      out.score += term * term;
    }

    const double direct_rate = learning_rate(direct_schedule, i);
    const double noisy_rate = learning_rate(noisy_schedule, i);
    std::vector<double> dnext(grid.size()), nnext(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      dnext[j] = (1.0 - direct_rate) * direct[j] + direct_rate * direct_post[j];
      nnext[j] = (1.0 - noisy_rate) * noisy[j] + noisy_rate * noisy_post[j];
    }
    direct = MixingPmf(std::move(dnext), MixingPmf::unchecked{});
    noisy = MixingPmf(std::move(nnext), MixingPmf::unchecked{});
  }
  return out;
}

}  // namespace detail

/// Monte Carlo calibration of the learning-rate exponent gamma: scores every
/// gamma in the grid with an independently seeded simulation (derived from
/// (seed, gamma index), so results do not depend on the parallelism degree)
/// and returns the argmin. Ties prefer the larger gamma. Errors if more than
/// 5% of the terms of any gamma had to be skipped for zero update
/// differences, which signals a grid too coarse to calibrate on.
inline CalibrationResult calibrate_gamma(const CalibrationConfig& config) {
  config.validate();
  const std::size_t count = config.gamma_grid.size();
  std::vector<GammaScore> scores(count);

  unsigned threads = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t l = next.fetch_add(1);
      if (l >= count) return;
      try {
        scores[l] = detail::score_gamma(config, config.gamma_grid[l],
                                        Philox(config.seed, static_cast<std::uint64_t>(l) + 1));
      } catch (...) {
        std::scoped_lock lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& s : scores) {
    if (s.skipped * 20 > config.horizon)
      throw degenerate_error("calibration skipped more than 5% of terms at gamma = " +
                             std::to_string(s.gamma) + "; the parameter grid is too coarse");
  }

  CalibrationResult result;
  result.objective = std::move(scores);
  std::size_t best = 0;
  for (std::size_t l = 1; l < count; ++l)
    if (result.objective[l].score <= result.objective[best].score) best = l;  // ties -> larger gamma
  result.gamma_hat = result.objective[best].gamma;
  return result;
}

}  // namespace deconv

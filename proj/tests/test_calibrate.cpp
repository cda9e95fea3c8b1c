#include "deconv/calibrate.hpp"

#include <gtest/gtest.h>

#include <memory>

#include "deconv/grid.hpp"

namespace {

using deconv::calibrate_gamma;
using deconv::CalibrationConfig;
using deconv::MixingPmf;
using deconv::NoiseFamily;
using deconv::ParameterGrid;

CalibrationConfig small_config() {
  CalibrationConfig config;
  config.grid = std::make_shared<const ParameterGrid>(
      ParameterGrid::from_spec({-4.0, 4.0, 1.0, 0.5, 2.0, 0.5}));
  config.g0 = MixingPmf::uniform(config.grid->size());
  config.gamma_grid = {0.6, 0.7, 0.8, 0.9, 1.0};
  config.horizon = 200;
  config.alpha = 1.0;
  config.noise = {NoiseFamily::laplace, 0.5};
  config.seed = 7;
  return config;
}

TEST(Calibrate, DefaultGammaGrid) {
  const auto grid = CalibrationConfig::default_gamma_grid();
  ASSERT_EQ(grid.size(), 500u);
  EXPECT_NEAR(grid.front(), 0.501, 1e-12);
  EXPECT_DOUBLE_EQ(grid.back(), 1.0);
}

TEST(Calibrate, ZeroNoiseLimitSelectsGammaOne) {
  // With vanishing Gaussian noise Y ~= X, the noisy and direct recursions at
  // gamma = 1 see the same data, so the objective is ~0 there and gamma_hat
  // must be 1.
  auto config = small_config();
  config.noise = {NoiseFamily::gaussian, 1e-9};
  config.horizon = 100;
  const auto result = calibrate_gamma(config);
  EXPECT_DOUBLE_EQ(result.gamma_hat, 1.0);
  const auto& trace = result.objective;
  EXPECT_LT(trace.back().score, 1e-6);
  for (std::size_t l = 0; l + 1 < trace.size(); ++l)
    EXPECT_GT(trace[l].score, trace.back().score);
}

TEST(Calibrate, DeterministicForFixedSeed) {
  const auto a = calibrate_gamma(small_config());
  const auto b = calibrate_gamma(small_config());
  EXPECT_EQ(a.gamma_hat, b.gamma_hat);
  ASSERT_EQ(a.objective.size(), b.objective.size());
  for (std::size_t l = 0; l < a.objective.size(); ++l) {
    EXPECT_EQ(a.objective[l].score, b.objective[l].score);
    EXPECT_EQ(a.objective[l].skipped, b.objective[l].skipped);
  }
}

TEST(Calibrate, InvariantToParallelismDegree) {
  auto config1 = small_config();
  config1.threads = 1;
  auto config2 = small_config();
  config2.threads = 2;
  const auto a = calibrate_gamma(config1);
  const auto b = calibrate_gamma(config2);
  EXPECT_EQ(a.gamma_hat, b.gamma_hat);
  for (std::size_t l = 0; l < a.objective.size(); ++l)
    EXPECT_EQ(a.objective[l].score, b.objective[l].score);
}

TEST(Calibrate, TraceCoversTheGammaGrid) {
  const auto config = small_config();
  const auto result = calibrate_gamma(config);
  ASSERT_EQ(result.objective.size(), config.gamma_grid.size());
  for (std::size_t l = 0; l < config.gamma_grid.size(); ++l) {
    EXPECT_EQ(result.objective[l].gamma, config.gamma_grid[l]);
    EXPECT_GE(result.objective[l].score, 0.0);
    EXPECT_LE(result.objective[l].skipped, config.horizon / 20);
  }
}

TEST(Calibrate, ConfigValidation) {
  auto config = small_config();
  config.gamma_grid = {0.4, 0.9};
  EXPECT_THROW(calibrate_gamma(config), deconv::contract_error);

  config = small_config();
  config.gamma_grid = {0.9, 0.7};
  EXPECT_THROW(calibrate_gamma(config), deconv::contract_error);

  config = small_config();
  config.horizon = 0;
  EXPECT_THROW(calibrate_gamma(config), deconv::contract_error);

  config = small_config();
  std::vector<double> w(config.grid->size(), 0.0);
  w[0] = 1.0;
  config.g0 = MixingPmf::from_weights(w);  // not strictly positive
  EXPECT_THROW(calibrate_gamma(config), deconv::contract_error);
}

}  // namespace

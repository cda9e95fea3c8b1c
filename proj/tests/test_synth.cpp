#include "deconv/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "deconv/kernels.hpp"

namespace {

using deconv::bimodal_preset;
using deconv::generate_stream;
using deconv::MixingPmf;
using deconv::MixturePreset;
using deconv::multimodal_preset;
using deconv::NoiseFamily;
using deconv::NoiseModel;
using deconv::ParameterGrid;
using deconv::Philox;
using deconv::sample_signal;
using deconv::unimodal_preset;

TEST(Presets, UnimodalComponents) {
  const auto preset = unimodal_preset();
  ASSERT_EQ(preset.components().size(), 2u);
  EXPECT_DOUBLE_EQ(preset.components()[0].weight, 0.3);
  EXPECT_DOUBLE_EQ(preset.components()[0].mean, -1.0);
  EXPECT_DOUBLE_EQ(preset.components()[0].variance, 2.0);
  EXPECT_DOUBLE_EQ(preset.components()[1].weight, 0.7);
  EXPECT_NEAR(preset.total_weight(), 1.0, 1e-15);
}

TEST(Presets, BimodalWeightsAsPublishedSumToPointNine) {
  const auto raw = bimodal_preset(false);
  EXPECT_NEAR(raw.total_weight(), 0.9, 1e-15);
  const auto normalized = bimodal_preset();
  EXPECT_NEAR(normalized.total_weight(), 1.0, 1e-15);
  EXPECT_NEAR(normalized.components()[0].weight, 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(normalized.components()[1].weight, 5.0 / 9.0, 1e-15);
  // Non-unit raw weights are rejected by the checked constructor.
  EXPECT_THROW(MixturePreset::from_components({{0.4, -2.0, 1.0}, {0.5, 4.0, 1.0}}),
               deconv::contract_error);
}

TEST(Presets, MultimodalWeightsSumToOne) {
  const auto preset = multimodal_preset();
  ASSERT_EQ(preset.components().size(), 5u);
  EXPECT_NEAR(preset.total_weight(), 1.0, 1e-15);
}

TEST(Presets, PdfMatchesMixturePdfOnSharedAtoms) {
  const auto preset = unimodal_preset();
  const ParameterGrid grid({{-1.0, 2.0}, {3.0, 1.5}});
  const auto pmf = MixingPmf::from_weights({0.3, 0.7});
  for (double x : {-3.0, 0.0, 1.2, 3.0, 6.4}) {
    EXPECT_NEAR(preset.pdf(x), deconv::mixture_pdf(grid, pmf, x), 1e-15);
  }
  EXPECT_NEAR(preset.pdf(0.0), 0.077260867197074700276, 1e-15);
}

TEST(SampleSignal, DegeneratePresetIsStandardNormal) {
  const auto preset = MixturePreset::from_components({{1.0, 0.0, 1.0}});
  Philox rng(21);
  const auto xs = sample_signal(preset, 100000, rng);
  double sum = 0.0;
  for (double x : xs) sum += x;
  EXPECT_NEAR(sum / static_cast<double>(xs.size()), 0.0, 0.02);
}

TEST(SampleSignal, UnimodalMeanMatchesMomentIdentity) {
  // E X = 0.3 (-1) + 0.7 (3) = 1.8
  Philox rng(22);
  const auto xs = sample_signal(unimodal_preset(), 100000, rng);
  double sum = 0.0;
  for (double x : xs) sum += x;
  EXPECT_NEAR(sum / static_cast<double>(xs.size()), 1.8, 0.03);
}

TEST(SampleSignal, Deterministic) {
  Philox a(5), b(5);
  const auto xs = sample_signal(unimodal_preset(), 100, a);
  const auto ys = sample_signal(unimodal_preset(), 100, b);
  EXPECT_EQ(xs, ys);
}

TEST(GenerateStream, DecompositionIsExact) {
  Philox rng(9);
  const auto stream = generate_stream(unimodal_preset(), {NoiseFamily::laplace, 0.5}, 1000, rng);
  for (const auto& obs : stream) EXPECT_EQ(obs.y, obs.x + obs.z);
}

TEST(GenerateStream, VarianceAddsAcrossIndependentParts) {
  // var Y = var X + sd^2; for the unimodal preset
  // var X = 0.3*(2 + 1) + 0.7*(1.5 + 9) - 1.8^2 = 5.01.
  Philox rng(10);
  const NoiseModel noise{NoiseFamily::laplace, 0.5};
  const auto stream = generate_stream(unimodal_preset(), noise, 100000, rng);
  double sum = 0.0, sq = 0.0;
  for (const auto& obs : stream) {
    sum += obs.y;
    sq += obs.y * obs.y;
  }
  const double n = static_cast<double>(stream.size());
  const double var = sq / n - (sum / n) * (sum / n);
  const double expected = 5.01 + 0.25;
  EXPECT_NEAR(var / expected, 1.0, 0.02);
}

TEST(GenerateStream, PureFunctionOfSeed) {
  Philox a(77), b(77);
  const auto s1 = generate_stream(multimodal_preset(), {NoiseFamily::gaussian, 1.0}, 50, a);
  const auto s2 = generate_stream(multimodal_preset(), {NoiseFamily::gaussian, 1.0}, 50, b);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].x, s2[i].x);
    EXPECT_EQ(s1[i].z, s2[i].z);
  }
}

}  // namespace

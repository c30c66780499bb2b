#include "advcap/attack.hpp"
#include "advcap/errors.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace advcap {
namespace {

using testing::random_captions;
using testing::random_images;
using testing::scramble;
using testing::tiny_config;

double loss_at(const CaptionModel& m, const ImageBatch& images, const CaptionBatch& caps) {
  return forward_loss(m, images, caps);
}

TEST(FgsmStepTest, ScalarLinearModel) {
  // J = theta * x has dJ/dx = theta.
  const double theta = 2.0;
  const std::vector<double> x{0.5};
  const std::vector<double> g{theta};
  const auto out = fgsm_step(x, g, AttackConfig{});
  EXPECT_DOUBLE_EQ(out[0], 0.6);
}

TEST(FgsmStepTest, ZeroGradientLeavesPixel) {
  const std::vector<double> x{0.3, 0.7};
  const std::vector<double> g{0.0, -0.0};
  const auto out = fgsm_step(x, g, AttackConfig{});
  EXPECT_EQ(out, x);
}

TEST(FgsmStepTest, ClampsToRange) {
  const std::vector<double> x{0.97, 0.02};
  const std::vector<double> g{1.0, -3.0};
  const auto out = fgsm_step(x, g, AttackConfig{});
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 0.0);
}

TEST(FgsmStepTest, MagnitudeIsEpsilonWhenUnclamped) {
  // Dyadic values make the arithmetic exact.
  AttackConfig cfg;
  cfg.epsilon = 0.125;
  std::vector<double> x;
  std::vector<double> g;
  for (int k = 40; k < 216; ++k) {
    x.push_back(k / 256.0);
    g.push_back((k % 3 == 0 ? -1.0 : 1.0) * (k + 1) * 1e-3);
  }
  const auto out = fgsm_step(x, g, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(std::abs(out[i] - x[i]), 0.125);
}

TEST(FgsmStepTest, RejectsMismatchedShapes) {
  const std::vector<double> x{0.5, 0.5};
  const std::vector<double> g{1.0};
  EXPECT_THROW(fgsm_step(x, g, AttackConfig{}), DimensionError);
}

TEST(AttackConfigTest, Validation) {
  AttackConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AttackConfig{};
  c.clamp_min = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

class FgsmModelTest : public ::testing::Test {
 protected:
  FgsmModelTest() : model_(tiny_config(), SpecialTokens{}, 5) { scramble(model_, 6); }
  CaptionModel model_;
};

TEST_F(FgsmModelTest, InputGradientMatchesFiniteDifferences) {
  const auto images = random_images(model_.config(), 2, 7);
  const auto caps = random_captions(model_.config(), model_.special_tokens(), 2, 8);
  const auto g = input_gradient(model_, images, caps);
  ASSERT_EQ(g.size(), images.pixels().size());
  const double h = 1e-4;
  for (std::size_t i = 0; i < g.size(); i += 7) {
    ImageBatch plus = images;
    ImageBatch minus = images;
    plus.pixels()[i] += h;
    minus.pixels()[i] -= h;
    const double fd = (loss_at(model_, plus, caps) - loss_at(model_, minus, caps)) / (2 * h);
    if (std::abs(g[i]) > 1e-8) EXPECT_LT(std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i])), 1e-4) << i;
  }
}

TEST_F(FgsmModelTest, InputGradientIsDeterministicAndReadOnly) {
  const auto images = random_images(model_.config(), 3, 9);
  const auto caps = random_captions(model_.config(), model_.special_tokens(), 3, 10);
  const auto before = model_.parameters().checksum();
  EXPECT_EQ(input_gradient(model_, images, caps), input_gradient(model_, images, caps));
  EXPECT_EQ(model_.parameters().checksum(), before);
}

TEST_F(FgsmModelTest, ZeroEpsilonIsIdentity) {
  const auto images = random_images(model_.config(), 2, 11);
  const auto caps = random_captions(model_.config(), model_.special_tokens(), 2, 12);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  const auto adv = fgsm(model_, images, caps, cfg);
  EXPECT_EQ(adv.perturbed.pixels(), images.pixels());
  for (double v : adv.perturbation) EXPECT_EQ(v, 0.0);
}

TEST_F(FgsmModelTest, DoesNotMutateInputs) {
  const auto images = random_images(model_.config(), 2, 13);
  const ImageBatch copy = images;
  const auto caps = random_captions(model_.config(), model_.special_tokens(), 2, 14);
  const auto adv = fgsm(model_, images, caps, AttackConfig{});
  EXPECT_EQ(images, copy);
  EXPECT_EQ(adv.source_ids, images.ids());
}

TEST_F(FgsmModelTest, FirstOrderIncreaseAndBounds) {
  const auto images = random_images(model_.config(), 4, 15);
  const auto caps = random_captions(model_.config(), model_.special_tokens(), 4, 16);
  const AttackConfig cfg;
  const auto g = input_gradient(model_, images, caps);
  const auto adv = fgsm(model_, images, caps, cfg);
  double dot = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dot += g[i] * adv.perturbation[i];
    EXPECT_LE(std::abs(adv.perturbation[i]), cfg.epsilon + 1e-6);
    EXPECT_GE(adv.perturbed.pixels()[i], 0.0);
    EXPECT_LE(adv.perturbed.pixels()[i], 1.0);
    EXPECT_DOUBLE_EQ(adv.perturbed.pixels()[i] - images.pixels()[i], adv.perturbation[i]);
  }
  EXPECT_GE(dot, 0.0);
}

TEST(FgsmPropertyTest, RandomInstances) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> eps_dist(0.0, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    CaptionModel model(tiny_config(), SpecialTokens{}, rng());
    scramble(model, rng(), 0.2);
    const auto images = random_images(model.config(), 2, rng());
    const auto caps = random_captions(model.config(), model.special_tokens(), 2, rng());
    AttackConfig cfg;
    cfg.epsilon = trial % 10 == 0 ? 0.0 : eps_dist(rng);
    const auto g = input_gradient(model, images, caps);
    const auto adv = fgsm(model, images, caps, cfg);
    double dot = 0.0;
    double linf = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      dot += g[i] * adv.perturbation[i];
      linf = std::max(linf, std::abs(adv.perturbation[i]));
      ASSERT_GE(adv.perturbed.pixels()[i], 0.0);
      ASSERT_LE(adv.perturbed.pixels()[i], 1.0);
    }
    ASSERT_LE(linf, cfg.epsilon + 1e-6);
    ASSERT_GE(dot, 0.0);
    if (cfg.epsilon == 0.0) ASSERT_EQ(adv.perturbed.pixels(), images.pixels());
  }
}

// ---------------------------------------------------------------------------
// Difference images

AdversarialBatch wrap(const ImageBatch& original, const ImageBatch& perturbed) {
  AdversarialBatch a{perturbed, original.ids(), {}};
  for (std::size_t i = 0; i < original.pixels().size(); ++i) {
    a.perturbation.push_back(perturbed.pixels()[i] - original.pixels()[i]);
  }
  return a;
}

TEST(DifferenceImageTest, IdenticalGivesZeros) {
  auto images = random_images(tiny_config(), 2, 3);
  images.ids() = {"a", "b"};
  const auto diff = difference_image(images, wrap(images, images));
  for (double v : diff.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(DifferenceImageTest, SinglePixelBecomesOne) {
  auto images = random_images(tiny_config(), 1, 4);
  images.ids() = {"a"};
  for (double& v : images.pixels()) v = 0.5;
  ImageBatch pert = images;
  pert.pixels()[37] += 0.1;
  const auto diff = difference_image(images, wrap(images, pert));
  int nonzero = 0;
  for (std::size_t i = 0; i < diff.pixels().size(); ++i) {
    if (diff.pixels()[i] != 0.0) {
      ++nonzero;
      EXPECT_EQ(i, 37u);
      EXPECT_EQ(diff.pixels()[i], 1.0);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(DifferenceImageTest, RescalesPerImage) {
  auto images = random_images(tiny_config(), 2, 5);
  images.ids() = {"a", "b"};
  ImageBatch pert = images;
  pert.image(0)[0] = images.image(0)[0] + 0.4 > 1 ? 0 : images.image(0)[0] + 0.4;
  pert.image(1)[3] = images.image(1)[3] > 0.5 ? images.image(1)[3] - 0.01 : images.image(1)[3] + 0.01;
  const auto diff = difference_image(images, wrap(images, pert));
  for (int b = 0; b < 2; ++b) {
    const auto img = diff.image(b);
    EXPECT_EQ(*std::max_element(img.begin(), img.end()), 1.0);
    EXPECT_EQ(*std::min_element(img.begin(), img.end()), 0.0);
  }
}

TEST(DifferenceImageTest, IdMismatchIsPairingError) {
  auto images = random_images(tiny_config(), 2, 6);
  images.ids() = {"a", "b"};
  auto adv = wrap(images, images);
  adv.source_ids = {"a", "c"};
  EXPECT_THROW(difference_image(images, adv), PairingError);
}

TEST(TriptychTest, PanelsSideBySide) {
  Image a(3, 2, 2);
  Image b(3, 2, 2);
  Image c(3, 2, 2);
  std::fill(a.data.begin(), a.data.end(), 0.1);
  std::fill(b.data.begin(), b.data.end(), 0.2);
  std::fill(c.data.begin(), c.data.end(), 0.3);
  const Image t = compose_triptych(a, b, c, 3);
  EXPECT_EQ(t.height, 6);
  EXPECT_GE(t.width, 18);
  EXPECT_EQ(t.at(0, 0, 0), 0.1);
  EXPECT_EQ(t.at(1, 5, t.width - 1), 0.3);
  EXPECT_THROW(compose_triptych(a, b, Image(3, 2, 3)), PairingError);
}

}  // namespace
}  // namespace advcap

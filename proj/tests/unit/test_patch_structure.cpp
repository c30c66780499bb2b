#include "advcap/attack.hpp"
#include "advcap/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace advcap {
namespace {

// Between-block over within-block sum of squares for one (C, S, S) image,
// with the block grid shifted by `offset` pixels.
double block_ratio(std::span<const double> v, int channels, int size, int block, int offset) {
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        groups[{(y + offset) / block, (x + offset) / block}].push_back(
            v[(static_cast<std::size_t>(c) * size + y) * size + x]);
      }
    }
  }
  const double grand = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double between = 0.0;
  double within = 0.0;
  for (const auto& [key, g] : groups) {
    const double m = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double a : g) within += (a - m) * (a - m);
  }
  return within > 0.0 ? between / within : 0.0;
}

// FGSM at eps 0.1 against a briefly trained toy model with 8 px patches.
class PatchStructureTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto cfg = ExperimentConfig::toy_default();
    cfg.corpus.num_images = 24;
    data_ = new ExperimentData(prepare_data(cfg));
    auto train = cfg.baseline;
    train.epochs = 60;
    model_ = new CaptionModel(train_baseline(data_->model, data_->vocab.special(), data_->train, train).model);

    std::vector<std::size_t> idx(data_->train.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::vector<std::size_t> first(idx.size(), 0);
    images_ = new ImageBatch(gather_images(data_->train, idx));
    const auto caps = gather_captions(data_->train, idx, first, data_->vocab.special().pad);
    gradient_ = new std::vector<double>(input_gradient(*model_, *images_, caps));
    adv_ = new AdversarialBatch(fgsm(*model_, *images_, caps, AttackConfig{}));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete model_;
    delete images_;
    delete gradient_;
    delete adv_;
  }

  // Images where the patch-aligned grid scores above the half-shifted grid.
  static int aligned_wins(const std::vector<double>& values) {
    const auto& m = data_->model;
    const std::size_t per = static_cast<std::size_t>(m.channels) * m.image_size * m.image_size;
    int wins = 0;
    for (int b = 0; b < images_->batch(); ++b) {
      const std::span<const double> v(values.data() + b * per, per);
      if (block_ratio(v, m.channels, m.image_size, m.patch_size, 0) >
          block_ratio(v, m.channels, m.image_size, m.patch_size, m.patch_size / 2)) {
        ++wins;
      }
    }
    return wins;
  }

  static ExperimentData* data_;
  static CaptionModel* model_;
  static ImageBatch* images_;
  static std::vector<double>* gradient_;
  static AdversarialBatch* adv_;
};

ExperimentData* PatchStructureTest::data_ = nullptr;
CaptionModel* PatchStructureTest::model_ = nullptr;
ImageBatch* PatchStructureTest::images_ = nullptr;
std::vector<double>* PatchStructureTest::gradient_ = nullptr;
AdversarialBatch* PatchStructureTest::adv_ = nullptr;

TEST_F(PatchStructureTest, GradientMagnitudeIsPatchAligned) {
  std::vector<double> mag(gradient_->size());
  std::transform(gradient_->begin(), gradient_->end(), mag.begin(), [](double g) { return std::abs(g); });
  EXPECT_GE(aligned_wins(mag), images_->batch() * 9 / 10);
}

// The displayed difference is |x' - x|, which sign() flattens to eps wherever
// no clamp binds; the aligned grid is compared on it directly.
TEST_F(PatchStructureTest, DifferenceImageIsPatchAligned) {
  const auto diff = difference_image(*images_, *adv_);
  EXPECT_GT(aligned_wins(diff.pixels()), images_->batch() / 2);
}

TEST_F(PatchStructureTest, AttackRaisesLossOnTrainedModel) {
  std::mt19937_64 rng(31);
  const int trials = 40;
  int raised = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::size_t> idx(data_->train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(4);
    const std::vector<std::size_t> first(idx.size(), 0);
    const auto images = gather_images(data_->train, idx);
    const auto caps = gather_captions(data_->train, idx, first, data_->vocab.special().pad);
    const auto adv = fgsm(*model_, images, caps, AttackConfig{});
    raised += forward_loss(*model_, adv.perturbed, caps) >= forward_loss(*model_, images, caps);
  }
  EXPECT_GE(raised * 100, trials * 95);
}

}  // namespace
}  // namespace advcap

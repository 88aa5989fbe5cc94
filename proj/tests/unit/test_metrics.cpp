#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "genesis/errors.hpp"
#include "genesis/metrics.hpp"
#include "oracles.hpp"

using namespace genesis;
using namespace genesis::metrics;

namespace {

Mask mask(int h, int w, std::initializer_list<std::pair<int, int>> on) {
  Mask m(h, w);
  for (auto [i, j] : on) m.at(i, j) = 1;
  return m;
}

LabelMap random_labels(std::mt19937_64& rng, int h, int w, int k) {
  LabelMap l(h, w);
  std::uniform_int_distribution<int> d(0, k - 1);
  for (auto& v : l.labels) v = d(rng);
  return l;
}

std::vector<Mask> masks_of(const LabelMap& l, int k, bool skip_zero) {
  std::vector<Mask> out;
  for (int v = skip_zero ? 1 : 0; v < k; ++v) out.push_back(l.mask_of(v));
  return out;
}

}  // namespace

TEST(Iou, Cases) {
  const auto a = mask(2, 2, {{0, 0}, {0, 1}});
  const auto b = mask(2, 2, {{0, 1}, {1, 1}});
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, mask(2, 2, {{1, 0}, {1, 1}})), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(iou(Mask(2, 2), Mask(2, 2)), 0.0);
}

TEST(Covering, WorkedExample) {
  // |R1| = 4 with best IOU 0.5, |R2| = 2 with best IOU 1.
  const auto r1 = mask(3, 4, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto r2 = mask(3, 4, {{2, 2}, {2, 3}});
  const auto p1 = mask(3, 4, {{0, 0}, {0, 1}});
  const std::vector<Mask> gt{r1, r2}, pred{p1, r2};
  EXPECT_NEAR(segmentation_covering(gt, pred), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mean_segmentation_covering(gt, pred), 0.75, 1e-15);
  EXPECT_DOUBLE_EQ(segmentation_covering(gt, gt), 1.0);
  EXPECT_DOUBLE_EQ(mean_segmentation_covering(gt, gt), 1.0);
}

TEST(Covering, EmptyGroundTruthIsAnError) {
  const std::vector<Mask> gt{Mask(2, 2)};
  EXPECT_THROW(segmentation_covering(gt, gt), Error);
  EXPECT_THROW(mean_segmentation_covering(gt, gt), Error);
}

TEST(Covering, SplittingWithinAnObjectNeverHelps) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const auto gt_l = random_labels(rng, 6, 6, 3);
    const auto sub = random_labels(rng, 6, 6, 3);
    // Every predicted segment lies inside one ground-truth segment.
    LabelMap pr_l(6, 6);
    for (std::size_t p = 0; p < pr_l.labels.size(); ++p) pr_l.labels[p] = 3 * gt_l.labels[p] + sub.labels[p];
    const auto gt = masks_of(gt_l, 3, false);
    auto pred = masks_of(pr_l, 9, false);
    const double sc = segmentation_covering(gt, pred);
    const double msc = mean_segmentation_covering(gt, pred);
    const auto target = static_cast<std::size_t>(rng() % pred.size());
    Mask a(6, 6), b(6, 6);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t p = 0; p < pred[target].bits.size(); ++p) {
      if (!pred[target].bits[p]) continue;
      (coin(rng) ? a : b).bits[p] = 1;
    }
    pred[target] = a;
    pred.push_back(b);
    EXPECT_LE(segmentation_covering(gt, pred), sc + 1e-15);
    EXPECT_LE(mean_segmentation_covering(gt, pred), msc + 1e-15);
  }
}

TEST(Covering, SplittingAStraddlingPredictionCanHelp) {
  // Covering rewards separating pixels of different objects.
  const auto g1 = mask(1, 4, {{0, 0}, {0, 1}});
  const auto g2 = mask(1, 4, {{0, 2}, {0, 3}});
  const auto all = mask(1, 4, {{0, 0}, {0, 1}, {0, 2}, {0, 3}});
  const std::vector<Mask> gt{g1, g2};
  EXPECT_DOUBLE_EQ(segmentation_covering(gt, {all}), 0.5);
  EXPECT_DOUBLE_EQ(segmentation_covering(gt, {g1, g2}), 1.0);
}

TEST(Covering, MatchesBruteForce) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 500; ++t) {
    const int h = 1 + static_cast<int>(rng() % 8), w = 1 + static_cast<int>(rng() % 8);
    const auto gt = masks_of(random_labels(rng, h, w, 4), 4, false);
    std::vector<Mask> pred;
    for (int i = 0; i < 3; ++i) {
      Mask m(h, w);
      for (auto& b : m.bits) b = rng() % 2;
      pred.push_back(m);
    }
    bool any = false;
    for (const auto& m : gt) any |= !m.empty();
    ASSERT_TRUE(any);
    EXPECT_NEAR(segmentation_covering(gt, pred), genesis::testing::sc_bruteforce(gt, pred), 1e-12);
    EXPECT_NEAR(mean_segmentation_covering(gt, pred), genesis::testing::msc_bruteforce(gt, pred), 1e-12);
    const double sc = segmentation_covering(gt, pred);
    EXPECT_GE(sc, 0.0);
    EXPECT_LE(sc, 1.0);
  }
}

TEST(Ari, PermutationInvarianceAndPerfectMatch) {
  std::vector<int> a{0, 0, 1, 1, 2, 2, 2};
  std::vector<int> renamed{5, 5, 3, 3, 9, 9, 9};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, renamed), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(renamed, a), 1.0);
}

TEST(Ari, BalancedSplitVersusOneLabelIsZero) {
  const std::vector<int> truth{0, 0, 0, 1, 1, 1};
  const std::vector<int> one(6, 4);
  EXPECT_NEAR(adjusted_rand_index(truth, one), 0.0, 1e-15);
  EXPECT_NEAR(genesis::testing::ari_pair_counting(truth, one), 0.0, 1e-15);
}

TEST(Ari, DegenerateSingleCluster) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({1, 1, 1}, {2, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0}, {3}), 1.0);
}

TEST(Ari, MatchesPairCountingOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const int n = 2 + static_cast<int>(rng() % 63);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng() % 4);
    for (auto& v : b) v = static_cast<int>(rng() % 5);
    EXPECT_NEAR(adjusted_rand_index(a, b), genesis::testing::ari_pair_counting(a, b), 1e-12);
  }
}

TEST(Ari, RandomLabelingsAverageZero) {
  std::mt19937_64 rng(6);
  const int trials = 1000;
  std::vector<double> v;
  for (int t = 0; t < trials; ++t) {
    std::vector<int> a(64), b(64);
    for (auto& x : a) x = static_cast<int>(rng() % 4);
    for (auto& x : b) x = static_cast<int>(rng() % 4);
    v.push_back(adjusted_rand_index(a, b));
  }
  const auto s = summarize(v);
  EXPECT_LT(std::abs(s.mean), 3.0 * s.std / std::sqrt(trials));
}

TEST(ForegroundAri, RestrictsToForeground) {
  LabelMap pred(2, 3);
  pred.labels = {7, 1, 1, 2, 2, 7};
  const std::vector<Mask> gt{mask(2, 3, {{0, 1}, {0, 2}}), mask(2, 3, {{1, 0}, {1, 1}})};
  EXPECT_DOUBLE_EQ(foreground_ari(gt, pred), 1.0);
  EXPECT_THROW(foreground_ari({Mask(2, 3)}, pred), Error);
}

TEST(Scores, PerfectPredictionScoresOne) {
  LabelMap labels(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) labels.at(i, j) = (i < 2 ? 1 : 2) * (j < 2);
  const auto gt = std::vector<Mask>{labels.mask_of(1), labels.mask_of(2)};
  const auto s = score_image(gt, labels, masks_of(labels, 3, false));
  EXPECT_DOUBLE_EQ(s.ari, 1.0);
  EXPECT_DOUBLE_EQ(s.sc, 1.0);
  EXPECT_DOUBLE_EQ(s.msc, 1.0);
}

TEST(Scores, SummaryOfConstantsHasZeroStd) {
  const auto s = summarize({0.4, 0.4, 0.4});
  EXPECT_DOUBLE_EQ(s.mean, 0.4);
  EXPECT_NEAR(s.std, 0.0, 1e-15);
}

TEST(Scores, PredictedMaskModes) {
  auto pi = torch::zeros({3, 2, 2});
  pi[0].fill_(0.45);
  pi[1].fill_(0.35);
  pi[2].fill_(0.2);
  pi[1][0][0] = 0.6;
  pi[0][0][0] = 0.2;
  const auto arg = predicted_masks(pi, PredictedMasks::argmax);
  EXPECT_EQ(arg[0].area(), 3u);
  EXPECT_EQ(arg[1].area(), 1u);
  const auto thr = predicted_masks(pi, PredictedMasks::threshold);
  EXPECT_EQ(thr[0].area(), 0u);
  EXPECT_EQ(thr[1].area(), 1u);
  EXPECT_EQ(argmax_labels(pi).at(0, 0), 1);
}

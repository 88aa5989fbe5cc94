#include <gtest/gtest.h>

#include "genesis/errors.hpp"
#include "genesis/nets.hpp"
#include "oracles.hpp"

using namespace genesis;
using namespace genesis::nets;

namespace {

void zero_biases(torch::nn::Module& m) {
  torch::NoGradGuard g;
  for (auto& p : m.named_parameters()) {
    if (p.key().find("bias") != std::string::npos) p.value().zero_();
  }
}

}  // namespace

TEST(GatedEncoder, StageResolutionsFor64) {
  torch::manual_seed(0);
  GatedConvEncoder enc(3, 64, 64, 256);
  const auto stages = enc->forward_stages(torch::rand({2, 3, 64, 64}));
  const std::vector<int> sizes{64, 32, 32, 16, 16};
  const std::vector<int> filters{32, 32, 64, 64, 64};
  ASSERT_EQ(stages.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(stages[i].size(1), filters[i]);
    EXPECT_EQ(stages[i].size(2), sizes[i]);
    EXPECT_EQ(stages[i].size(3), sizes[i]);
  }
}

TEST(GatedEncoder, ZeroImageGivesFiniteFeatures) {
  torch::manual_seed(0);
  GatedConvEncoder enc(3, 16, 16, 32, 0.5);
  zero_biases(*enc);
  const auto f = enc->forward(torch::zeros({2, 3, 16, 16}));
  EXPECT_EQ(f.sizes(), (std::vector<std::int64_t>{2, 32}));
  EXPECT_TRUE(torch::isfinite(f).all().item<bool>());
}

TEST(GatedEncoder, IdenticalInputsGiveIdenticalRows) {
  torch::manual_seed(1);
  GatedConvEncoder enc(3, 16, 16, 8, 0.25);
  enc->eval();
  const auto x = torch::rand({1, 3, 16, 16});
  const auto f = enc->forward(torch::cat({x, x}));
  EXPECT_TRUE(torch::equal(f[0], f[1]));
}

TEST(GatedEncoder, ShapeMismatchThrows) {
  GatedConvEncoder enc(3, 16, 16, 8, 0.25);
  EXPECT_THROW(enc->forward(torch::rand({1, 4, 16, 16})), ShapeError);
  EXPECT_THROW(enc->forward(torch::rand({1, 3, 8, 16})), ShapeError);
  EXPECT_THROW(GatedConvEncoder(3, 10, 16, 8), ShapeError);
}

TEST(GatedDecoder, ReproducesTheImageShape) {
  for (int size : {4, 8, 12, 32}) {
    GatedConvEncoder enc(3, size, size, 8, 0.25);
    GatedConvDecoder dec(8, 3, size, size, 0.25);
    const auto y = dec->forward(enc->forward(torch::rand({2, 3, size, size})));
    EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{2, 3, size, size}));
  }
}

TEST(BroadcastDecoder, DeterministicAndDegenerateSize) {
  torch::manual_seed(2);
  BroadcastDecoder dec(4, 3, 8, 2, 1, 1);
  const auto z = torch::randn({1, 4});
  EXPECT_TRUE(torch::equal(dec->forward(z), dec->forward(z.clone())));
  const auto coords = dec->coordinates(torch::TensorOptions());
  EXPECT_EQ(coords.abs().sum().item<float>(), 0.0f);
}

TEST(BroadcastDecoder, CoordinatesSpanTheUnitSquare) {
  BroadcastDecoder dec(2, 3, 4, 1, 4, 6);
  const auto c = dec->coordinates(torch::TensorOptions());
  EXPECT_FLOAT_EQ(c[0][0][0].item<float>(), -1.0f);
  EXPECT_FLOAT_EQ(c[0][0][5].item<float>(), 1.0f);
  EXPECT_FLOAT_EQ(c[1][3][0].item<float>(), 1.0f);
  EXPECT_FLOAT_EQ(c[1][0][2].item<float>(), -1.0f);
}

TEST(BroadcastDecoder, GradientMatchesFiniteDifferences) {
  torch::manual_seed(3);
  BroadcastDecoder dec(3, 3, 4, 2, 4, 4);
  dec->to(torch::kFloat64);
  auto z = torch::randn({2, 3}, torch::kFloat64).requires_grad_(true);
  const auto w = torch::randn({2, 3, 4, 4}, torch::kFloat64);
  auto params = dec->parameters();
  params.push_back(z);
  const auto r = genesis::testing::gradcheck([&] { return (torch::sigmoid(dec->forward(z)) * w).sum(); }, params, 1e-5, 8);
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(RecurrentCell, ZeroEverythingStaysZero) {
  RecurrentCell cell(3, 4);
  {
    torch::NoGradGuard g;
    for (auto& p : cell->parameters()) p.zero_();
  }
  const auto state = cell->zero_state(2, torch::TensorOptions());
  const auto [h, next] = cell->step(torch::zeros({2, 3}), state);
  EXPECT_EQ(h.abs().sum().item<float>(), 0.0f);
}

TEST(RecurrentCell, DeterministicBoundedRollout) {
  torch::manual_seed(4);
  RecurrentCell cell(3, 5);
  auto state = cell->zero_state(1, torch::TensorOptions());
  const auto input = torch::randn({1, 3}) * 10;
  const auto first = cell->step(input, state).first;
  EXPECT_TRUE(torch::equal(first, cell->step(input, state).first));
  for (int k = 0; k < 16; ++k) {
    auto [h, next] = cell->step(input, state);
    state = next;
    EXPECT_TRUE(torch::isfinite(state.c).all().item<bool>());
    EXPECT_LT(h.abs().max().item<float>(), 1.0f);
  }
}

TEST(GaussianHead, SoftplusFloorParameterization) {
  const auto g = gaussian_from_raw(torch::zeros({1, 4}, torch::kFloat64));
  EXPECT_NEAR(g.std[0][0].item<double>(), std::log(2.0) + 1e-4, 1e-12);
  const auto low = gaussian_from_raw(torch::full({1, 4}, -1e4, torch::kFloat64));
  EXPECT_GE(low.std.min().item<double>(), 1e-4);
}

TEST(GaussianHead, GradientMatchesFiniteDifferences) {
  torch::manual_seed(5);
  GaussianHead head(4, 3);
  head->to(torch::kFloat64);
  const auto f = torch::randn({3, 4}, torch::kFloat64);
  const auto r = genesis::testing::gradcheck(
      [&] {
        const auto g = head->forward(f);
        return (g.mean.square() + g.std.log()).sum();
      },
      head->parameters(), 1e-5, 12);
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(LatentHeadMLP, PositiveStd) {
  LatentHeadMLP mlp(4, 8, 3);
  const auto g = mlp->forward(torch::randn({10, 4}) * 100);
  EXPECT_GT(g.std.min().item<float>(), 0.0f);
}

TEST(Blocks, GradientsMatchFiniteDifferences) {
  torch::manual_seed(6);
  GatedConvEncoder enc(3, 4, 4, 4, 0.125);
  GatedConvDecoder dec(4, 2, 4, 4, 0.125);
  ComponentEncoder cenc(4, 4, 4, 2, 5, 0.125);
  enc->to(torch::kFloat64);
  dec->to(torch::kFloat64);
  cenc->to(torch::kFloat64);
  const auto x = torch::rand({2, 3, 4, 4}, torch::kFloat64);
  const auto x4 = torch::rand({2, 4, 4, 4}, torch::kFloat64);
  auto params = enc->parameters();
  for (auto& p : dec->parameters()) params.push_back(p);
  for (auto& p : cenc->parameters()) params.push_back(p);
  const auto w = torch::randn({2, 2, 4, 4}, torch::kFloat64);
  const auto r = genesis::testing::gradcheck(
      [&] {
        const auto q = cenc->forward(x4);
        return (dec->forward(enc->forward(x)).tanh() * w).sum() + q.mean.sum() + q.std.log().sum();
      },
      params, 1e-5, 4);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

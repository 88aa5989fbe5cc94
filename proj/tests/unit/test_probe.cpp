#include <gtest/gtest.h>

#include <cmath>

#include "genesis/errors.hpp"
#include "genesis/model.hpp"
#include "genesis/probe.hpp"
#include "oracles.hpp"

using namespace genesis;
using namespace genesis::probe;

namespace {

ProbeConfig quick() {
  ProbeConfig c;
  c.hidden = 32;
  c.epochs = 30;
  c.batch_size = 64;
  c.lr = 1e-2;
  return c;
}

}  // namespace

TEST(ProbeConfig, DefaultsFollowTheProtocol) {
  ProbeConfig c;
  EXPECT_EQ(c.hidden, 512);
  EXPECT_EQ(c.epochs, 100);
  EXPECT_EQ(c.train_size, 50000);
  EXPECT_EQ(c.batch_size, 128);
  EXPECT_DOUBLE_EQ(c.lr, 1e-4);
  EXPECT_EQ(to_string(c.task), "sprite_count");
  EXPECT_THROW(task_from_string("height"), ConfigError);
}

TEST(Probe, ConstantLabelsAreTriviallyPredicted) {
  const auto x = torch::randn({50, 4});
  const auto y = torch::zeros({50}, torch::kInt64);
  const auto r = train_probe(x, y, x, y, quick());
  EXPECT_DOUBLE_EQ(r.test_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.chance, 1.0);
}

TEST(Probe, OneHotInputsAreSeparable) {
  const auto y = torch::randint(0, 4, {400}, torch::kInt64);
  const auto x = torch::one_hot(y, 4).to(torch::kFloat32);
  const auto r = train_probe(x, y, x, y, quick());
  EXPECT_GE(r.test_accuracy, 0.99);
}

TEST(Probe, RandomLabelsStayAtChance) {
  torch::manual_seed(0);
  const int n = 2000;
  const auto xtr = torch::randn({n, 8});
  const auto ytr = torch::randint(0, 4, {n}, torch::kInt64);
  const auto xte = torch::randn({n, 8});
  const auto yte = torch::randint(0, 4, {n}, torch::kInt64);
  const auto r = train_probe(xtr, ytr, xte, yte, quick());
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  EXPECT_LT(std::abs(r.test_accuracy - 0.25), 3.0 * sigma);
  EXPECT_EQ(r.classes, 4);
}

TEST(Probe, ImbalanceWarns) {
  auto y = torch::zeros({100}, torch::kInt64);
  y.narrow(0, 0, 5).fill_(1);
  const auto x = torch::randn({100, 3});
  auto c = quick();
  c.epochs = 1;
  EXPECT_FALSE(train_probe(x, y, x, y, c).warnings.empty());
}

TEST(Probe, RepresentationIsDeterministicAndFrozen) {
  torch::manual_seed(1);
  auto m = model::make_model(genesis::testing::tiny_config(Variant::genesis, 8, 3, 3));
  m->train();
  const auto x = torch::rand({5, 3, 8, 8});
  const auto before = m->parameters()[0].clone();
  const auto a = extract_representation(*m, x, 2);
  const auto b = extract_representation(*m, x, 5);
  EXPECT_TRUE(torch::allclose(a, b));
  EXPECT_EQ(a.size(1), 9 * 2);
  EXPECT_FALSE(a.requires_grad());
  EXPECT_TRUE(m->is_training());
  EXPECT_TRUE(torch::equal(before, m->parameters()[0]));
}

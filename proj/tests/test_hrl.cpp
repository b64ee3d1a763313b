#include <doctest.h>

#include <cmath>

#include "ara/hrl.hpp"
#include "support/gradcheck.hpp"

using namespace ara;
using namespace ara::hrl;

TEST_SUITE("hrl") {

TEST_CASE("the default threshold is the CE of a 0.4 probability on a foreground pixel") {
  CHECK(kDefaultAlpha == doctest::Approx(0.916290731874155));
}

TEST_CASE("hardness maps are [H,W] and strictly inside (0,1)") {
  Rng rng(2);
  const HrlParams p = HrlParams::init(rng);
  const Tensor g = normalize_gradient(testing::random_tensor({32, 24, 3}, rng, -1e-3, 1e-3));
  const Tensor z = hardness_forward(p, g);
  REQUIRE(z.shape() == Shape{32, 24});
  for (float x : z.data()) CHECK((x > 0.0f && x < 1.0f));
  CHECK_THROWS_AS(hardness_forward(p, Tensor::zeros({30, 32, 3})), ShapeError);
  CHECK_THROWS_AS(hardness_forward(p, Tensor::zeros({32, 32})), ShapeError);
}

TEST_CASE("normalized gradients have zero mean and unit variance per channel") {
  Rng rng(3);
  const Tensor n = normalize_gradient(testing::random_tensor({16, 16, 3}, rng, -5e-4, 2e-3));
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
      const double v = n.data()[i * 3 + c];
      s += v;
      ss += v * v;
    }
    CHECK(std::abs(s / 256) < 1e-5);
    CHECK(ss / 256 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("pseudo-labels mark pixels whose CE exceeds the threshold") {
  // Literal CE only charges foreground pixels: -y log p > alpha <=> y = 1 and p < exp(-alpha).
  const Tensor gt = Tensor::from_data({2, 3}, {1, 1, 1, 0, 0, 0});
  const Tensor pred = Tensor::from_data({2, 3}, {0.39f, 0.41f, 0.9f, 0.99f, 0.5f, 0.01f});
  const Tensor lit = pseudo_labels(gt, pred);
  const std::vector<float> want_lit{1, 0, 0, 0, 0, 0};
  CHECK(std::vector<float>(lit.data().begin(), lit.data().end()) == want_lit);
  // Full CE also charges background: -(1-y) log(1-p) > alpha <=> p > 1 - exp(-alpha) = 0.6.
  const Tensor full = pseudo_labels(gt, pred, kDefaultAlpha, ops::CeMode::full);
  const std::vector<float> want_full{1, 0, 0, 1, 0, 0};
  CHECK(std::vector<float>(full.data().begin(), full.data().end()) == want_full);
}

TEST_CASE("multi-object pseudo-labels are the union over objects") {
  const Tensor gt = Tensor::from_data({2, 1, 2}, {1, 0, 0, 1});
  const Tensor pred = Tensor::from_data({2, 1, 2}, {0.1f, 0.5f, 0.5f, 0.9f});
  const Tensor z = pseudo_labels(gt, pred);
  CHECK(z.shape() == Shape{1, 2});
  CHECK(z.data()[0] == 1.0f);
  CHECK(z.data()[1] == 0.0f);
}

TEST_CASE("hardness losses agree with their definitions") {
  const Tensor z = Tensor::from_data({1, 2}, {1, 0});
  const Tensor h = Tensor::from_data({1, 2}, {0.75f, 0.25f});
  CHECK(hardness_loss(z, h, HardnessLoss::mse).item() == doctest::Approx(0.0625));
  CHECK(hardness_loss(z, h, HardnessLoss::mae).item() == doctest::Approx(0.25));
  CHECK(hardness_loss(z, h, HardnessLoss::ce).item() == doctest::Approx(-std::log(0.75)));
}

TEST_CASE("the trainer fits a fixed target and reports pre-step values") {
  Rng rng(4);
  HrlTrainer trainer(HrlParams::init(rng), default_hrl_optimizer());
  const Tensor g = normalize_gradient(testing::random_tensor({32, 32, 3}, rng, -1, 1));
  std::vector<float> zv(32 * 32, 0.0f);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 32; ++x) zv[y * 32 + x] = 1.0f;
  const Tensor z = Tensor::from_data({32, 32}, zv);
  const Tensor before = trainer.predict(g);
  const auto first = trainer.step(g, z);
  CHECK(std::equal(before.data().begin(), before.data().end(), first.hardness.data().begin()));
  CHECK(first.loss == doctest::Approx(hardness_loss(z, before).item()));
  double last = first.loss;
  for (int i = 0; i < 30; ++i) last = trainer.step(g, z).loss;
  CHECK(last < first.loss);
}

TEST_CASE("a non-finite hardness loss aborts the learner") {
  Rng rng(5);
  HrlTrainer trainer(HrlParams::init(rng), default_hrl_optimizer());
  Tensor z = Tensor::zeros({32, 32});
  z.mutable_data()[0] = std::nanf("");
  CHECK_THROWS_AS(trainer.step(Tensor::zeros({32, 32, 3}), z), HrlDiverged);
}

}  // TEST_SUITE

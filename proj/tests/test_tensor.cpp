#include <doctest.h>

#include <sstream>

#include "ara/optim.hpp"
#include "ara/serialize.hpp"
#include "op_cases.hpp"

using namespace ara;

TEST_SUITE("tensor") {

TEST_CASE("every op's gradient matches finite differences of its reference") {
  Rng rng(11);
  for (auto& c : testing::op_cases(rng)) {
    CAPTURE(c.name);
    const auto g = testing::gradcheck(c.lib, c.ref, c.inputs, rng, c.per_input, 1e-4, c.check);
    CAPTURE(g.worst);
    CHECK(g.checked > 0);
    CHECK(g.max_rel < 1e-3);
    CHECK(g.forward_err < 1e-5);
  }
}

TEST_CASE("gradients accumulate across backward passes until zero_grad") {
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f});
  x.set_requires_grad(true);
  ops::sum(ops::square(x)).backward();
  ops::sum(ops::square(x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  CHECK(x.grad()[1] == doctest::Approx(8.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("a graph cannot be backpropagated twice") {
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f});
  x.set_requires_grad(true);
  Tensor loss = ops::sum(ops::mul(x, x));
  loss.backward();
  CHECK_THROWS_AS(loss.backward(), GraphError);
}

TEST_CASE("shared subexpressions receive the sum of their uses") {
  Tensor x = Tensor::from_data({1}, {3.0f});
  x.set_requires_grad(true);
  Tensor y = ops::mul_scalar(x, 2.0f);
  ops::sum(ops::add(ops::mul(y, y), y)).backward();  // 4x^2 + 2x
  CHECK(x.grad()[0] == doctest::Approx(26.0));
}

TEST_CASE("detach cuts the graph and copies the data") {
  Tensor x = Tensor::from_data({2}, {1.0f, -1.0f});
  x.set_requires_grad(true);
  Tensor y = ops::mul_scalar(x, 3.0f);
  Tensor d = y.detach();
  CHECK_FALSE(d.requires_grad());
  d.mutable_data()[0] = 100.0f;
  CHECK(y.data()[0] == 3.0f);
  CHECK_THROWS(y.mutable_data());
}

TEST_CASE("shape errors are reported") {
  CHECK_THROWS_AS(ops::add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(ops::reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
  CHECK_THROWS_AS(ops::bilinear_upsample(Tensor::zeros({1, 1, 4, 4}), 2, 2), ShapeError);
}

TEST_CASE("conv2d matches a hand-computed 3x3 example") {
  // 1x1x3x3 input 1..9, 2x2 kernel of ones, stride 1, no padding.
  Tensor in = Tensor::from_data({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor b = Tensor::from_data({1}, {0.5f});
  Tensor out = ops::conv2d(in, w, b, 1, 0);
  REQUIRE(out.shape() == Shape{1, 1, 2, 2});
  CHECK(out.data()[0] == 12.5f);
  CHECK(out.data()[1] == 16.5f);
  CHECK(out.data()[2] == 24.5f);
  CHECK(out.data()[3] == 28.5f);
  // 3x3 ones, padding 1, stride 2: each output sums the 2x2 corner block it overlaps.
  Tensor p = ops::conv2d(in, Tensor::full({1, 1, 3, 3}, 1.0f), Tensor(), 2, 1);
  REQUIRE(p.shape() == Shape{1, 1, 2, 2});
  CHECK(p.data()[0] == 12.0f);
  CHECK(p.data()[1] == 16.0f);
  CHECK(p.data()[2] == 24.0f);
  CHECK(p.data()[3] == 28.0f);
  CHECK_THROWS_AS(ops::conv2d(in, w, Tensor(), 2, 1), ShapeError);
}

TEST_CASE("bilinear upsampling by 2 follows the half-pixel convention") {
  Tensor in = Tensor::from_data({1, 1, 1, 2}, {0.0f, 1.0f});
  Tensor out = ops::bilinear_upsample(in, 1, 4);
  // Sample positions -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1).
  CHECK(out.data()[0] == doctest::Approx(0.0));
  CHECK(out.data()[1] == doctest::Approx(0.25));
  CHECK(out.data()[2] == doctest::Approx(0.75));
  CHECK(out.data()[3] == doctest::Approx(1.0));
}

TEST_CASE("softmax rows sum to one and survive large logits") {
  Tensor a = Tensor::from_data({2, 3}, {1000.0f, 1001.0f, 1002.0f, -5.0f, 0.0f, 5.0f});
  Tensor s = ops::softmax(a, 1);
  for (int r = 0; r < 2; ++r) {
    double total = 0.0;
    for (int c = 0; c < 3; ++c) total += s.data()[r * 3 + c];
    CHECK(total == doctest::Approx(1.0));
  }
  CHECK(std::isfinite(s.data()[2]));
}

TEST_CASE("layer normalisation maps a constant channel to zeros") {
  Tensor a = Tensor::from_data({2, 2, 2}, {0.3f, 1.0f, 0.3f, 2.0f, 0.3f, 3.0f, 0.3f, 4.0f});
  Tensor n = ops::layer_normalize_per_channel(a, 2);
  for (int i = 0; i < 4; ++i) CHECK(n.data()[i * 2] == 0.0f);
}

TEST_CASE("binary cross-entropy literal form ignores background pixels") {
  Tensor p = Tensor::from_data({2}, {0.2f, 0.2f});
  Tensor y = Tensor::from_data({2}, {1.0f, 0.0f});
  Tensor lit = ops::binary_ce(p, y, ops::CeMode::literal);
  Tensor full = ops::binary_ce(p, y, ops::CeMode::full);
  CHECK(lit.data()[0] == doctest::Approx(-std::log(0.2)));
  CHECK(lit.data()[1] == 0.0f);
  CHECK(full.data()[1] == doctest::Approx(-std::log(0.8)));
}

TEST_CASE("Adam minimises a quadratic") {
  Tensor x = Tensor::from_data({2}, {3.0f, -2.0f});
  x.set_requires_grad(true);
  Adam opt({x}, AdamConfig{.lr = 0.1f});
  for (int i = 0; i < 300; ++i) {
    opt.zero_grad();
    ops::sum(ops::square(ops::add_scalar(x, -1.0f))).backward();
    opt.step();
  }
  CHECK(x.data()[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK(x.data()[1] == doctest::Approx(1.0).epsilon(0.01));
}

}  // TEST_SUITE

TEST_SUITE("serialize") {

TEST_CASE("tensor records round-trip bit-exactly") {
  Rng rng(3);
  Tensor t = testing::random_tensor({2, 3, 4}, rng);
  std::stringstream ss;
  io::write_tensor(ss, t);
  Tensor back = io::read_tensor(ss);
  CHECK(back.shape() == t.shape());
  CHECK(std::equal(back.data().begin(), back.data().end(), t.data().begin()));
}

TEST_CASE("tensor header is magic, version, rank, dims, little-endian") {
  std::stringstream ss;
  io::write_tensor(ss, Tensor::from_data({2}, {1.0f, -2.0f}));
  const std::string b = ss.str();
  REQUIRE(b.size() == 4 + 4 + 4 + 4 + 8);
  CHECK(b.substr(0, 4) == "ARAT");
  CHECK(b[4] == 1);
  CHECK(b[8] == 1);
  CHECK(b[12] == 2);
  CHECK(static_cast<unsigned char>(b[19]) == 0x3f);  // 1.0f = 0x3f800000
}

TEST_CASE("malformed tensor records raise distinct errors") {
  std::stringstream ss;
  io::write_tensor(ss, Tensor::from_data({2}, {1.0f, 2.0f}));
  const std::string good = ss.str();
  auto kind_of = [](const std::string& bytes) {
    std::istringstream in(bytes);
    try {
      io::read_tensor(in);
    } catch (const io::FormatError& e) {
      return e.kind();
    }
    FAIL("no error");
    return io::FormatError::Kind::io;
  };
  std::string bad_version = good;
  bad_version[4] = 9;
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(kind_of(good.substr(0, good.size() - 2)) == io::FormatError::Kind::truncated);
  CHECK(kind_of(bad_version) == io::FormatError::Kind::version_mismatch);
  CHECK(kind_of(bad_magic) == io::FormatError::Kind::bad_magic);
}

}  // TEST_SUITE

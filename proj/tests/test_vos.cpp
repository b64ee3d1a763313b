#include <doctest.h>

#include <filesystem>

#include "ara/serialize.hpp"
#include "fixtures.hpp"

using namespace ara;
using namespace ara::vos;
namespace fs = std::filesystem;

TEST_SUITE("vos") {

TEST_CASE("encoded memory and segmentation have the documented shapes and range") {
  const auto v = testing::small_videos(1)[0];
  const auto p = testing::small_model();
  const auto e = encode_memory(p, v.frames[0], v.object_mask(0, 0));
  CHECK(e.keys.shape() == Shape{8, 64});
  CHECK(e.values.shape() == Shape{5, 64});
  const Tensor prob = segment(p, MemorySet{{v.frames[0], v.object_mask(0, 0)}}, v.frames[1]);
  REQUIRE(prob.shape() == Shape{32, 32});
  for (float x : prob.data()) CHECK((x > 0.0f && x < 1.0f));
}

TEST_CASE("the first value row is the pooled mask") {
  const auto v = testing::small_videos(1)[0];
  const auto e = encode_memory(testing::small_model(), v.frames[0], v.object_mask(0, 0));
  const Tensor m = v.object_mask(0, 0);
  for (std::size_t py = 0; py < 8; ++py)
    for (std::size_t px = 0; px < 8; ++px) {
      double acc = 0.0;
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) acc += m.data()[(py * 4 + y) * 32 + px * 4 + x];
      CHECK(e.values.data()[py * 8 + px] == doctest::Approx(acc / 16.0));
    }
}

TEST_CASE("inference covers frames 1..T-1 with binary disjoint masks") {
  for (const auto& v : testing::small_videos(3)) {
    const auto pred = infer_video(testing::small_model(), v);
    REQUIRE(pred.probs.size() == v.length());
    CHECK_FALSE(pred.probs[0].defined());
    for (std::size_t t = 1; t < v.length(); ++t) {
      CHECK(pred.probs[t].shape() == v.masks[t].shape());
      const std::size_t plane = 32 * 32;
      for (std::size_t i = 0; i < plane; ++i) {
        float total = 0.0f;
        for (std::size_t o = 0; o < v.object_count; ++o) total += pred.masks[t].data()[o * plane + i];
        CHECK(total <= 1.0f);
      }
    }
  }
}

TEST_CASE("overriding a frame with itself changes nothing") {
  const auto v = testing::small_videos(1)[0];
  const auto p = testing::small_model();
  const auto a = infer_video(p, v);
  const auto b = infer_video(p, v, FrameOverrides{{0, v.frames[0]}, {2, v.frames[2]}});
  for (std::size_t t = 1; t < v.length(); ++t)
    CHECK(std::equal(a.probs[t].data().begin(), a.probs[t].data().end(), b.probs[t].data().begin()));
}

TEST_CASE("overriding a frame changes the prediction") {
  const auto v = testing::small_videos(1)[0];
  const auto p = testing::small_model();
  const auto a = infer_video(p, v);
  const auto b = infer_video(p, v, FrameOverrides{{0, Tensor::full({32, 32, 3}, 0.2f)}});
  CHECK_FALSE(std::equal(a.probs[1].data().begin(), a.probs[1].data().end(), b.probs[1].data().begin()));
}

TEST_CASE("a two-frame video yields one prediction") {
  auto v = testing::small_videos(1)[0];
  v.frames.resize(2);
  v.masks.resize(2);
  const auto pred = infer_video(testing::small_model(), v);
  CHECK(pred.probs.size() == 2);
  CHECK(pred.probs[1].defined());
  v.frames.resize(1);
  v.masks.resize(1);
  CHECK_THROWS_AS(infer_video(testing::small_model(), v), std::invalid_argument);
}

TEST_CASE("assign_objects picks the argmax above one half") {
  const Tensor probs = Tensor::from_data({2, 1, 3}, {0.9f, 0.4f, 0.6f, 0.7f, 0.3f, 0.8f});
  const Tensor m = assign_objects(probs);
  CHECK(m.data()[0] == 1.0f);
  CHECK(m.data()[3] == 0.0f);
  CHECK(m.data()[1] == 0.0f);
  CHECK(m.data()[4] == 0.0f);
  CHECK(m.data()[2] == 0.0f);
  CHECK(m.data()[5] == 1.0f);
}

TEST_CASE("inputs that are not a multiple of the stride are rejected") {
  const auto p = testing::small_model();
  CHECK_THROWS_AS(encode_memory(p, Tensor::zeros({30, 32, 3}), Tensor::zeros({30, 32})), ShapeError);
}

TEST_CASE("a short training run lowers the clip loss") {
  const auto data = testing::small_videos(4);
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.lr = 3e-3f;
  VosArch arch;
  arch.feature_dim = 8;
  arch.value_dim = 4;
  arch.decoder_hidden = 8;
  const auto r = train(data, cfg, arch);
  REQUIRE(r.losses.size() == 60);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    head += r.losses[i];
    tail += r.losses[50 + i];
  }
  CHECK(tail < head);
  const auto again = train(data, cfg, arch);
  CHECK(again.losses == r.losses);
}

TEST_CASE("checkpoints round-trip and reject foreign or future files") {
  const auto p = testing::small_model();
  const fs::path path = fs::temp_directory_path() / "ara_test_model.aram";
  save_checkpoint(p, path);
  const auto q = load_checkpoint(path);
  CHECK(q.arch.feature_dim == 8);
  CHECK(q.arch.value_dim == 4);
  const auto a = p.named_tensors(), b = q.named_tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
  }

  auto kind_of = [&](const std::string& bytes) {
    io::write_file(path, bytes);
    try {
      load_checkpoint(path);
    } catch (const io::FormatError& e) {
      return e.kind();
    }
    FAIL("accepted a damaged checkpoint");
    return io::FormatError::Kind::io;
  };
  save_checkpoint(p, path);
  const std::string good = io::read_file(path);
  std::string future = good;
  future[4] = 2;
  CHECK(kind_of(future) == io::FormatError::Kind::version_mismatch);
  CHECK(kind_of("ARAT" + good.substr(4)) == io::FormatError::Kind::bad_magic);
  CHECK(kind_of(good.substr(0, good.size() / 2)) == io::FormatError::Kind::truncated);
  fs::remove(path);
}

}  // TEST_SUITE

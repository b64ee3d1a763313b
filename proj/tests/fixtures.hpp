#pragma once

#include <vector>

#include "ara/synthvid.hpp"
#include "ara/vos_model.hpp"

// Small videos and an untrained model for fast structural tests.
namespace ara::testing {

inline synthvid::DataConfig small_data(std::size_t count = 2) {
  synthvid::DataConfig cfg;
  cfg.count = count;
  cfg.height = cfg.width = 32;
  cfg.length = 5;
  cfg.size_min = 4;
  cfg.size_max = 7;
  cfg.two_object_fraction = 0.5;
  return cfg;
}

inline std::vector<synthvid::VideoSequence> small_videos(std::size_t count = 2) {
  return synthvid::generate_dataset(small_data(count), "test");
}

inline vos::VosParams small_model(std::uint64_t seed = 5) {
  Rng rng(seed);
  vos::VosArch arch;
  arch.feature_dim = 8;
  arch.value_dim = 4;
  arch.decoder_hidden = 8;
  return vos::VosParams::init(arch, rng);
}

}  // namespace ara::testing

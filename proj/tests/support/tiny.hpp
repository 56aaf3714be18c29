#pragma once

#include "brp/config.hpp"
#include "brp/data.hpp"

namespace tiny {

// Small enough for a unit test to train in seconds on 64 x 64 images.
inline brp::TrainConfig config(int stage1_epochs = 2) {
  auto cfg = brp::TrainConfig::desk_scale();
  cfg.stage1.epochs = stage1_epochs;
  cfg.stage1.first_period = stage1_epochs;
  cfg.stage1.tafe.block_depths = {1, 1, 1, 1};
  cfg.stage1.tafe.growth_rate = 4;
  cfg.stage1.tafe.proj_channels = 8;
  cfg.stage1.tafe.stem_channels = 8;
  cfg.stage1.augment.crop_size = 64;
  cfg.stage2.epochs = 2;
  cfg.stage2.refine.growth_rates = {2, 2, 2, 2};
  cfg.stage2.refine.layers_per_block = 1;
  cfg.stage2.refine.stem_channels = 4;
  cfg.seed = 3;
  return cfg;
}

inline brp::SyntheticDataset data(int n, std::uint64_t seed, int side = 64) {
  brp::SynthConfig s;
  s.height = side;
  s.width = side;
  s.density = 10;
  s.seed = seed;
  return brp::synth_generate(n, s);
}

}  // namespace tiny

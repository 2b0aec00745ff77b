#pragma once

#include <cstddef>
#include <cstdint>

#include "ntrr/data_io.hpp"

namespace ntrr::training {

struct TrainConfig {
  double lr_init = 0.002;
  std::size_t warmup_steps = 0;  // 0: 10% of total_steps
  std::size_t epochs = 30;
  std::size_t total_steps = 0;   // 0: epochs * batches per epoch
  double alpha = 1.0;
  bool kl_half = false;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;
  bool rdrop_enabled = true;
  bool rdrop_duplicate = true;   // one forward over the doubled batch
  double grad_clip_norm = 1.0;   // 0 disables clipping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t min_freq = 1;
  double dev_ratio = 0.0;        // seeded split when no dev file is given
  std::size_t pretrain_epochs = 5;
  data::TokenMode token_mode = data::TokenMode::character;
  bool checkpoint_f32 = false;
};

}  // namespace ntrr::training

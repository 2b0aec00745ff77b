#pragma once

// Binary checkpoint:
//   "NTRR" | u32 version | u32 flags (bit 0: 64-bit values)
//   | u64 config length | config text (model keys, entity_types, vocab)
//   | u64 tensor count
//   | per tensor: u32 name length | name | u32 rank | u64 dims... | values
// All integers little-endian; values IEEE-754 little-endian.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntrr/data_io.hpp"
#include "ntrr/gradcheck.hpp"
#include "ntrr/model.hpp"

namespace ntrr::data {

inline constexpr char kCheckpointMagic[4] = {'N', 'T', 'R', 'R'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig config;
  Vocab vocab;
  std::vector<NamedTensor> tensors;
  bool f64 = true;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws CorruptionError with the failing byte offset.
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const model::ModelParams& params, const model::ModelConfig& config,
                     const Vocab& vocab, bool f64 = true);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ntrr::data

// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, all integers and reals little-endian:
//   "CTXG", u32 version
//   u64 count, then per parameter: u32 name length, name, u32 rank,
//     u64 dims[rank], f64 values[numel]
//   optimizer moments and step counters as a second table, same encoding
//   u64-length-prefixed UTF-8 blocks: config, vocabulary, run counters
//   u64 FNV-1a checksum of every preceding byte
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "ctg/trainer/state.hpp"

namespace ctg::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// FNV-1a over the serialized parameters, as 16 hex digits.
std::string checkpoint_digest(const TrainState& state);

}  // namespace ctg::train

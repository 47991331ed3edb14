// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//
//   bytes 0-7    magic "HSMLCKPT"
//   bytes 8-11   format version, uint32 little-endian
//   bytes 12-19  manifest length in bytes, uint64 little-endian
//   manifest     JSON: config, tensor names/shapes/offsets, counters,
//                generator states, hierarchy sizes
//   payload      float64 little-endian values, offsets counted in values
//
// Everything that influences later training is stored, so a resumed run
// continues exactly as an uninterrupted one would.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsml/harness/config.hpp"
#include "hsml/trainer.hpp"

namespace hsml::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  RunConfig config;
  TrainState state;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// Throws CheckpointError when `state` cannot have been produced by `config`
/// (different mode, architecture, aggregator or hierarchy shape).
void check_compatible(const TrainerConfig& config, const TrainState& state);

}  // namespace hsml::harness

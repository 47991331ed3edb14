// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include "hsml/harness/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace hsml::harness {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'H', 'S', 'M', 'L', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

struct PayloadWriter {
  json entries = json::array();
  std::vector<double> values;

  void add(const std::string& name, const ad::Tensor& t) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", values.size()}});
    values.insert(values.end(), t.values().begin(), t.values().end());
  }
  void add_group(const std::string& prefix, const ParamSet& set) {
    for (const auto& [name, t] : set) add(prefix + name, t);
  }
};

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint) {
  const TrainState& s = checkpoint.state;
  PayloadWriter payload;
  payload.add_group("params/", s.params);
  payload.add_group("adam_m/", s.adam.first_moment);
  payload.add_group("adam_v/", s.adam.second_moment);
  payload.add("state/window_sum", ad::Tensor::scalar(s.window.sum));
  if (s.window.previous_mean) {
    payload.add("state/window_previous_mean", ad::Tensor::scalar(*s.window.previous_mean));
  }
  payload.add("state/window_means", ad::Tensor::vector(s.window_means));

  json manifest = {
      {"config", to_json(checkpoint.config)},
      {"tensors", payload.entries},
      {"iteration", s.iteration},
      {"adam_step", s.adam.step},
      {"window_count", s.window.count},
      {"expansions", s.expansions},
      {"hierarchy", s.cluster.sizes},
      {"rng",
       {{"tasks", s.task_rng.state()},
        {"permutations", s.perm_rng.state()},
        {"expansion", s.expand_rng.state()}}},
  };
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, kCheckpointVersion, 4);
  put_u64(out, text.size(), 8);
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 8 * payload.values.size());
  for (double v : payload.values) put_u64(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(get_u64(bytes.data() + 8, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t manifest_size = get_u64(bytes.data() + 12, 8);
  if (manifest_size > bytes.size() - kHeaderSize) {
    throw CheckpointError("truncated checkpoint manifest");
  }
  const std::size_t payload_begin = kHeaderSize + manifest_size;
  if ((bytes.size() - payload_begin) % 8 != 0) {
    throw CheckpointError("checkpoint payload is not a whole number of float64 values");
  }
  const std::size_t n_values = (bytes.size() - payload_begin) / 8;

  Checkpoint cp;
  try {
    const json manifest = json::parse(bytes.begin() + kHeaderSize, bytes.begin() + payload_begin);
    apply_overrides(cp.config, manifest.at("config"));

    TrainState& s = cp.state;
    for (const json& entry : manifest.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const ad::Shape shape = entry.at("shape").get<ad::Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = ad::shape_numel(shape);
      if (offset > n_values || count > n_values - offset) {
        throw CheckpointError("tensor '" + name + "' lies outside the payload");
      }
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<double>(get_u64(bytes.data() + payload_begin + 8 * (offset + i), 8));
      }
      ad::Tensor t(shape, std::move(values));
      const auto slash = name.find('/');
      const std::string group = name.substr(0, slash);
      const std::string key = name.substr(slash + 1);
      if (group == "params") {
        s.params.emplace(key, std::move(t));
      } else if (group == "adam_m") {
        s.adam.first_moment.emplace(key, std::move(t));
      } else if (group == "adam_v") {
        s.adam.second_moment.emplace(key, std::move(t));
      } else if (name == "state/window_sum") {
        s.window.sum = t.item();
      } else if (name == "state/window_previous_mean") {
        s.window.previous_mean = t.item();
      } else if (name == "state/window_means") {
        s.window_means = t.values();
      } else {
        throw CheckpointError("unknown tensor '" + name + "'");
      }
    }
    s.iteration = manifest.at("iteration").get<std::size_t>();
    s.adam.step = manifest.at("adam_step").get<std::size_t>();
    s.window.count = manifest.at("window_count").get<std::size_t>();
    s.expansions = manifest.at("expansions").get<std::vector<std::size_t>>();
    s.cluster = cp.config.trainer.cluster;
    s.cluster.sizes = manifest.at("hierarchy").get<std::vector<std::size_t>>();
    s.task_rng.set_state(manifest.at("rng").at("tasks").get<std::string>());
    s.perm_rng.set_state(manifest.at("rng").at("permutations").get<std::string>());
    s.expand_rng.set_state(manifest.at("rng").at("expansion").get<std::string>());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint holds an ") + e.what());
  }
  check_compatible(cp.config.trainer, cp.state);
  return cp;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::vector<std::uint8_t> bytes = serialize(checkpoint);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void check_compatible(const TrainerConfig& config, const TrainState& state) {
  const auto& want = config.cluster.sizes;
  const auto& have = state.cluster.sizes;
  if (config.mode == Mode::Hsml) {
    const bool same_levels = want.size() == have.size() && !want.empty() && have[0] >= want[0] &&
                             std::equal(want.begin() + 1, want.end(), have.begin() + 1);
    if (!same_levels) {
      throw CheckpointError("hierarchy mismatch: checkpoint has a different cluster structure");
    }
  }
  TrainerConfig grown = config;
  grown.cluster.sizes = have;
  const TrainState reference = init_state(grown);
  for (const auto& [name, t] : reference.params) {
    auto it = state.params.find(name);
    if (it == state.params.end()) {
      throw CheckpointError("parameter '" + name + "' is missing from the checkpoint");
    }
    if (it->second.shape() != t.shape()) {
      throw CheckpointError("parameter '" + name + "' has shape " +
                            ad::shape_string(it->second.shape()) + " in the checkpoint, " +
                            ad::shape_string(t.shape()) + " in the configuration");
    }
  }
  for (const auto& [name, t] : state.params) {
    if (!reference.params.contains(name)) {
      throw CheckpointError("checkpoint has parameter '" + name + "' unknown to the configuration");
    }
  }
}

}  // namespace hsml::harness

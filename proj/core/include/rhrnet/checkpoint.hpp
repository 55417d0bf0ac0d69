#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "rhrnet/model.hpp"

namespace rhrnet {

// Optional trainer state carried inside a checkpoint: named float arrays
// (optimizer accumulators) plus named scalars (epoch, lr, counters, ...).
struct CheckpointExtra {
  ParameterSet<float> arrays;
  std::map<std::string, double> scalars;
};

// Versioned binary container: 4-byte magic "RHRN", u32 format version, u64
// header length, a JSON text header (config, seed, array directory, extra
// scalars), then the raw array payloads as little-endian float32 in row-major
// order, in directory order. load(save(m)) is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     std::uint64_t seed, const CheckpointExtra* extra = nullptr);

struct LoadedCheckpoint {
  ModelParams<float> params;
  std::uint64_t seed = 0;
  std::optional<CheckpointExtra> extra;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rhrnet

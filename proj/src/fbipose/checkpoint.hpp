#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "fbipose/network.hpp"

namespace fbipose {

inline constexpr int kCheckpointVersion = 1;

// A trained regressor together with the configuration that produced it.
// Serialised as CBOR: layer-name keyed float32 tensors with their shapes,
// batch-norm running statistics included, plus the topology version, the
// training config snapshot, the seed and free-form metadata.
struct Checkpoint {
  RegressorParams<float> params;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
// Throws kParse on malformed bytes, kSchemaVersion on an unknown format
// version and kTopologyMismatch when the topology version differs.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fbipose

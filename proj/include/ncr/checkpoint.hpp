#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ncr/adam.hpp"

// Checkpoint container: magic "NCKP", u32 version, u32 block count, then per
// block u32 name length, name bytes, u32 rank, u32 extents, little-endian
// f32 payload. Round-trips are bit-exact.

namespace ncr {

struct CheckpointError : std::runtime_error {
  enum class Kind { kBadMagic, kBadVersion, kNameMismatch, kShapeMismatch, kTruncated, kIo };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::vector<NamedParam<float>>& params);

// Fills the given parameters in place; every declared name must exist in the
// file with a matching shape.
void load_checkpoint(const std::string& path, std::vector<NamedParam<float>>& params);

}  // namespace ncr

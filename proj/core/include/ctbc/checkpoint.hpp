#pragma once

#include <string>

#include "ctbc/ppo.hpp"

namespace ctbc {

// Versioned binary container: magic "CTBC", u32 format version, u64 config
// hash, then named little-endian double arrays with explicit shapes. The
// round trip save -> load is bit-exact, including optimizer state and
// normalization statistics.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const PolicyBundle& bundle, const std::string& path);

// Throws std::runtime_error on bad magic/version/truncation, with a
// dimension report when the stored shapes disagree with each other.
PolicyBundle load_checkpoint(const std::string& path);

}  // namespace ctbc

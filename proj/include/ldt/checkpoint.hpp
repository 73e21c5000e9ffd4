#pragma once

#include <string>

#include "ldt/adam.hpp"
#include "ldt/model.hpp"

namespace ldt {

// All-zero parameters with the fixed topology's shapes. Handy as a
// deserialization target and in tests.
LdtNetParams zero_params();

// Binary container: magic "LDTN", u16 format version, u32 block count, a
// shape table of (u16 kind, u16 rank, u32 extents[rank]) entries, the raw
// little-endian float32 payloads in declaration order, and a trailing CRC32
// of the payload bytes. Round trips are bit-exact.
//
// Weight files hold the network blocks; optimizer checkpoints reuse the same
// container with Adam-specific kind tags. Loaders reject bad magic, version
// mismatches, truncation, trailing bytes, CRC mismatches, and shape tables
// that violate the fixed topology.
void save_params(const LdtNetParams& params, const std::string& path);
LdtNetParams load_params(const std::string& path);

void save_adam_state(const AdamState& state, const std::string& path);
AdamState load_adam_state(const std::string& path);

}  // namespace ldt

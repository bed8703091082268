#pragma once

#include <cstdint>
#include <string>

#include "rmfn/model.hpp"

namespace rmfn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   "RMFNCKPT" | u32 version | u64 fnv1a64(config text)
//   u64 config length | config text (serialize_config)
//   u64 tensor count | per tensor, in ParamStore order:
//     u32 name length | name | u32 rank | u64 extents[rank] | f64 values
// Only parameter values are stored; gradients and momentum are not.

std::string encode_checkpoint(const RmfnModel& model);
RmfnModel decode_checkpoint(const std::string& bytes);

void save_checkpoint(const RmfnModel& model, const std::string& path);
RmfnModel load_checkpoint(const std::string& path);

}  // namespace rmfn

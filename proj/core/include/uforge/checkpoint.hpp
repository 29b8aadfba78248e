#pragma once

#include <filesystem>

#include "uforge/mlp.hpp"
#include "uforge/params.hpp"

namespace uforge::nn {

/// Binary model checkpoint.
///
/// Layout (all integers little-endian):
///   magic "UFCK" | u32 version | u32 activation id | u64 arch seed
///   | u64 width count | u64 widths... | u64 tensor count
///   | per tensor: u64 name length | name bytes | u64 rows | u64 cols
///                 | f64 values (row-major)
///
/// The f64 payload round-trips bit-exactly.
struct Checkpoint {
  MlpArchitecture arch;
  ParamSet params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path,
                     const MlpArchitecture& arch, const ParamSet& params);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace uforge::nn

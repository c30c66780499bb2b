#pragma once

#include "advcap/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace advcap {

// Binary container, little-endian:
//   "ADVCAPCK" | u32 version | u64 n | n bytes of JSON metadata
//   u64 tensor count | per tensor: u32 name length, name, u8 group,
//   u64 rows, u64 cols, rows*cols raw float64 values (row-major)
// The metadata JSON holds "config", "special_tokens" and any caller extras.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  CaptionModel model;
  nlohmann::json metadata;
};

std::string serialize_checkpoint(const CaptionModel& model, const nlohmann::json& extra = {});
LoadedCheckpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const CaptionModel& model,
                     const nlohmann::json& extra = {});
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace advcap

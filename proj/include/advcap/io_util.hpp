#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace advcap {

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames, creating parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::uint64_t fnv1a64(std::string_view bytes);
std::string to_hex(std::uint64_t value);

// Emits a warning line on stderr. Tests may silence it.
void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace advcap

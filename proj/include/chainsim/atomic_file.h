#pragma once

#include <filesystem>
#include <string_view>

namespace chainsim {

// Writes to a sibling temp file and renames it over the target, so readers
// never observe a truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace chainsim

#pragma once

#include <filesystem>
#include <string_view>

namespace trojanq {

// Writes `text` to a temporary sibling of `path`, then renames it into place.
// Throws Error(IoError) on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace trojanq

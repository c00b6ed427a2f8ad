#pragma once

#include <filesystem>
#include <string_view>

namespace diverge {

/// Writes `content` to a temporary sibling of `path` and renames it into
/// place, so readers never observe a partial file. Throws std::runtime_error
/// mentioning the path on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace diverge

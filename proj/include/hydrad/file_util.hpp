#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace hydrad {

/// Writes `content` to a sibling temp file, fsyncs it and renames it over
/// `path`. Readers see either the old or the new document, never a mix.
/// Throws StorageError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole-file read. Throws StorageError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace hydrad

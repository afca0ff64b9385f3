#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtaudit/base.hpp"

namespace mtaudit {

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

// Write via temp file + rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Content fingerprint (fnv1a64, hex). Not cryptographic; used for resume checks
// and manifest digests.
std::string file_digest(const std::filesystem::path& path);
std::string content_digest(std::string_view content);

void ensure_parent_dir(const std::filesystem::path& path);

std::vector<std::string> split_fields(std::string_view line, char sep);

}  // namespace mtaudit

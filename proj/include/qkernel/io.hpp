#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace qk::io {

/// Shortest-round-trip-safe decimal rendering (%.17g).
std::string format_double(double v);
/// Strict parse of a whole field; throws FormatError.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace qk::io

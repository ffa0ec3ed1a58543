#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace selfgnn::io {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// Strict numeric parsing; throws DataError naming `what` on failure.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);

std::vector<std::string_view> split_tabs(std::string_view line);
std::string_view trim(std::string_view s);

/// Reads all lines; throws DataError if the file cannot be opened.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes text atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace selfgnn::io

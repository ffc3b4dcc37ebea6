#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slamhive::util {

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char separator);

/// Full-string numeric parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

/// Shortest text that reads back to the same double ("0.50" and "0.5" agree).
std::string format_number(double value);

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t value);

/// Order-sensitive digest over every regular file (relative path + bytes).
std::string hash_directory(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// 128 random bits as hex, for report tokens.
std::string random_token();

double wall_seconds();

}  // namespace slamhive::util

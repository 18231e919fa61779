#pragma once

// Shared helpers for the line-oriented text formats.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace survival {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
double parse_double(std::string_view token, int line = 0, std::string_view field = {});
std::uint64_t parse_uint(std::string_view token, int line = 0, std::string_view field = {});

/// Splits on any run of the given delimiters; empty fields are dropped.
std::vector<std::string_view> split_tokens(std::string_view text, std::string_view delims = " \t");
std::string_view trim(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// FNV-1a 64-bit digest rendered as 16 hex digits; stable across platforms.
std::string digest_hex(std::string_view text);

}  // namespace survival

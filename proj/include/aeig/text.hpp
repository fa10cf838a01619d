#pragma once

// Small helpers for the plain-text file formats.

#include <string>
#include <string_view>
#include <vector>

namespace aeig::text {

// Shortest representation that parses back to the identical double.
std::string format_double(double v);
// Throws ConfigError on malformed input.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
// Whitespace-separated tokens.
std::vector<std::string> tokens(std::string_view s);

}  // namespace aeig::text

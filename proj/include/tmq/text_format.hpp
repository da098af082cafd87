#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tmq {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Whole-string parse; throws ConfigError on trailing garbage or empty input.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace tmq

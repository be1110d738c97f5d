#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lcam {

// Shortest decimal form that parses back to the same double.
std::string format_real(double value);
// Fixed number of decimals, for human-facing tables.
std::string format_fixed(double value, int decimals);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);

}  // namespace lcam

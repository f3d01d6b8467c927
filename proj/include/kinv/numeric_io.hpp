#pragma once

#include <string>
#include <string_view>

namespace kinv {

/// Shortest decimal that parses back to the same double; locale independent.
std::string format_double(double value);

/// Strict full-string parse; throws Error(IoError) on anything else.
double parse_double(std::string_view text);

}  // namespace kinv

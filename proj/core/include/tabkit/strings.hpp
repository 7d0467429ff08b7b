#pragma once

#include <optional>
#include <string>

namespace tabkit {

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Strict parse of a full string as double; nullopt when anything is left
// over or the string is empty.
std::optional<double> parse_double(const std::string& s);

}  // namespace tabkit

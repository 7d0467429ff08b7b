#include "tabkit/strings.hpp"

#include <charconv>
#include <cmath>

namespace tabkit {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  // Tolerate one leading '+' (from_chars accepts only '-').
  if (*begin == '+') ++begin;
  if (begin == end) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

}  // namespace tabkit

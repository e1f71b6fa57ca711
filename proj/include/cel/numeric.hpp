#ifndef CEL_NUMERIC_HPP
#define CEL_NUMERIC_HPP

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace cel {

inline double expit(double z) {
  // Branches keep exp() from overflowing for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_exact(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Decimal with 17 significant digits (the CSV convention).
inline std::string format_17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Parses an unsigned decimal or hex-float literal ("0x1.8p-3"), locale-free.
/// Returns nullopt unless the whole input is consumed and the value is finite.
inline std::optional<double> parse_real(std::string_view text) {
  double value = 0.0;
  std::from_chars_result res{};
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    auto body = text.substr(2);
    if (body.empty() || body.front() == '-' || body.front() == '+') return std::nullopt;
    res = std::from_chars(body.data(), body.data() + body.size(), value, std::chars_format::hex);
    if (res.ec != std::errc{} || res.ptr != body.data() + body.size()) return std::nullopt;
  } else {
    if (text.empty() || text.front() == '-' || text.front() == '+') return std::nullopt;
    res = std::from_chars(text.data(), text.data() + text.size(), value, std::chars_format::general);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  }
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace cel

#endif  // CEL_NUMERIC_HPP

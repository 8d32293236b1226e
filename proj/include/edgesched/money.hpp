#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>

#include "edgesched/error.hpp"

namespace edgesched {

/// Monetary amount stored as integer micro-dollars.
///
/// Sums, comparisons and negation are exact, so identities such as
/// `total == c_s + c_e + c_t` and `reward == -total` hold bit-for-bit.
/// A single saturating sentinel represents an unbounded amount (used for
/// "no budget").
class Money {
 public:
  static constexpr std::int64_t kMicrosPerUnit = 1'000'000;

  constexpr Money() = default;

  static constexpr Money from_micros(std::int64_t micros) { return Money(micros); }

  /// Rounds to the nearest micro-dollar.
  static Money from_double(double value) {
    if (std::isinf(value) && value > 0) return unbounded();
    if (!std::isfinite(value)) throw ValidationError("non-finite money value");
    return Money(std::llround(value * static_cast<double>(kMicrosPerUnit)));
  }

  static constexpr Money unbounded() { return Money(kUnbounded); }
  static constexpr Money zero() { return Money(0); }

  constexpr std::int64_t micros() const { return micros_; }
  constexpr bool is_unbounded() const { return micros_ == kUnbounded; }

  double to_double() const {
    if (is_unbounded()) return std::numeric_limits<double>::infinity();
    return static_cast<double>(micros_) / static_cast<double>(kMicrosPerUnit);
  }

  constexpr Money operator+(Money o) const {
    if (is_unbounded() || o.is_unbounded()) return unbounded();
    return Money(micros_ + o.micros_);
  }
  constexpr Money operator-(Money o) const { return Money(micros_ - o.micros_); }
  constexpr Money operator-() const { return Money(-micros_); }
  constexpr Money operator*(std::int64_t k) const {
    if (is_unbounded()) return unbounded();
    return Money(micros_ * k);
  }
  Money& operator+=(Money o) { return *this = *this + o; }

  constexpr auto operator<=>(const Money&) const = default;

  /// Fixed six-decimal rendering; "inf" for the unbounded sentinel.
  std::string str() const {
    if (is_unbounded()) return "inf";
    const bool neg = micros_ < 0;
    const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-micros_)
                                  : static_cast<std::uint64_t>(micros_);
    std::string frac = std::to_string(mag % kMicrosPerUnit);
    frac.insert(0, 6 - frac.size(), '0');
    return (neg ? "-" : "") + std::to_string(mag / kMicrosPerUnit) + "." + frac;
  }

  /// Exact decimal parse (at most six fractional digits), or "inf".
  static Money parse(std::string_view text) {
    if (text == "inf" || text == "+inf" || text == "Inf") return unbounded();
    if (text.empty()) throw ParseError("empty money value");
    bool neg = false;
    std::size_t i = 0;
    if (text[0] == '-' || text[0] == '+') {
      neg = text[0] == '-';
      ++i;
    }
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    int frac_digits = 0;
    bool seen_dot = false;
    bool any_digit = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '.' && !seen_dot) {
        seen_dot = true;
        continue;
      }
      if (c < '0' || c > '9') {
        throw ParseError("invalid money value '" + std::string(text) + "'");
      }
      any_digit = true;
      if (seen_dot) {
        if (frac_digits == 6) {
          throw ParseError("money value has more than 6 decimals: '" +
                           std::string(text) + "'");
        }
        frac = frac * 10 + (c - '0');
        ++frac_digits;
      } else {
        whole = whole * 10 + (c - '0');
      }
    }
    if (!any_digit) throw ParseError("invalid money value '" + std::string(text) + "'");
    for (; frac_digits < 6; ++frac_digits) frac *= 10;
    const std::int64_t micros = whole * kMicrosPerUnit + frac;
    return Money(neg ? -micros : micros);
  }

 private:
  static constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max() / 4;

  constexpr explicit Money(std::int64_t micros) : micros_(micros) {}

  std::int64_t micros_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, Money m) { return os << m.str(); }

}  // namespace edgesched

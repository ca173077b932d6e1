#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace bridgeaudit {

/// Non-negative token quantity in base units. Arithmetic is exact and
/// never wraps; subtraction goes through checked_sub().
class Amount {
 public:
  using Int = boost::multiprecision::cpp_int;

  Amount() = default;
  Amount(std::uint64_t v) : value_(v) {}  // NOLINT(google-explicit-constructor)

  /// Throws std::invalid_argument on negative input.
  static Amount from_int(Int v);

  /// Accepts a plain run of ASCII digits (no sign, no exponent, no
  /// separators). Returns nullopt otherwise.
  static std::optional<Amount> parse(std::string_view decimal);

  const Int& value() const noexcept { return value_; }
  bool is_zero() const noexcept { return value_.is_zero(); }
  std::string to_string() const;

  Amount& operator+=(const Amount& rhs) {
    value_ += rhs.value_;
    return *this;
  }
  friend Amount operator+(Amount lhs, const Amount& rhs) { return lhs += rhs; }

  /// floor(this * num / den). den must be non-zero.
  Amount mul_div_floor(const Amount& num, const Amount& den) const;

  friend bool operator==(const Amount& a, const Amount& b) { return a.value_ == b.value_; }
  friend std::strong_ordering operator<=>(const Amount& a, const Amount& b) {
    const int c = a.value_.compare(b.value_);
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

 private:
  Int value_{0};
};

/// a - b when a >= b; nullopt signals underflow. Callers must treat
/// underflow as a condition in its own right rather than clamping.
std::optional<Amount> checked_sub(const Amount& a, const Amount& b);

}  // namespace bridgeaudit

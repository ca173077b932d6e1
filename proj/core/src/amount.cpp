#include "bridgeaudit/amount.hpp"

#include <stdexcept>

namespace bridgeaudit {

Amount Amount::from_int(Int v) {
  if (v.sign() < 0) throw std::invalid_argument("Amount cannot be negative");
  Amount a;
  a.value_ = std::move(v);
  return a;
}

std::optional<Amount> Amount::parse(std::string_view decimal) {
  if (decimal.empty()) return std::nullopt;
  Int v = 0;
  for (char c : decimal) {
    if (c < '0' || c > '9') return std::nullopt;
    v *= 10;
    v += static_cast<unsigned>(c - '0');
  }
  return from_int(std::move(v));
}

std::string Amount::to_string() const { return value_.str(); }

Amount Amount::mul_div_floor(const Amount& num, const Amount& den) const {
  if (den.is_zero()) throw std::invalid_argument("mul_div_floor: zero denominator");
  // Both operands are non-negative, so truncating division is floor.
  return from_int((value_ * num.value_) / den.value_);
}

std::optional<Amount> checked_sub(const Amount& a, const Amount& b) {
  if (a < b) return std::nullopt;
  return Amount::from_int(a.value() - b.value());
}

}  // namespace bridgeaudit

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "bridgeaudit/amount.hpp"

namespace bridgeaudit {

/// Seconds since the Unix epoch. Simulated or real; logic never reads a clock.
using UnixTime = std::int64_t;

/// Short lowercase chain name ("eth", "bsc"). Identity of a chain.
class ChainId {
 public:
  ChainId() = default;
  explicit ChainId(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  bool empty() const noexcept { return name_.empty(); }

  friend bool operator==(const ChainId&, const ChainId&) = default;
  friend auto operator<=>(const ChainId&, const ChainId&) = default;

 private:
  std::string name_;
};

/// Deployment-level description of a chain.
struct ChainInfo {
  ChainId id;
  std::int64_t finality_lag = 0;  // seconds before a block counts as final
};

enum class TokenFlag : std::uint8_t {
  Reflection = 1u << 0,
  TestToken = 1u << 1,
};

class TokenFlags {
 public:
  constexpr TokenFlags() = default;
  constexpr bool has(TokenFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr TokenFlags& set(TokenFlag f) {
    bits_ |= static_cast<std::uint8_t>(f);
    return *this;
  }
  constexpr bool none() const { return bits_ == 0; }
  friend constexpr bool operator==(TokenFlags, TokenFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr std::string_view kNativeToken = "native";

/// A token on one chain. Identity is (chain, address); symbol and flags
/// are advisory and ignored by comparisons.
struct TokenId {
  ChainId chain;
  std::string address;  // lowercase hex, or "native"
  std::optional<std::string> symbol;
  TokenFlags flags;

  bool is_native() const { return address == kNativeToken; }
  /// "chain:address", the form used in config files.
  std::string key() const;

  friend bool operator==(const TokenId& a, const TokenId& b) {
    return a.chain == b.chain && a.address == b.address;
  }
  friend std::strong_ordering operator<=>(const TokenId& a, const TokenId& b) {
    if (auto c = a.chain <=> b.chain; c != 0) return c;
    return a.address <=> b.address;
  }
};

/// Parses "chain:address". Returns nullopt when the separator is missing.
std::optional<TokenId> parse_token_key(std::string_view key);

struct TxRef {
  ChainId chain;
  std::string tx_hash;
  std::uint64_t log_index = 0;

  std::string to_string() const;  // "chain:hash:log_index"

  friend bool operator==(const TxRef&, const TxRef&) = default;
  friend auto operator<=>(const TxRef&, const TxRef&) = default;
};

/// How a withdrawal names the deposit that backs it.
struct PairById {
  std::string bridge_id;
  std::uint64_t deposit_id = 0;
  friend bool operator==(const PairById&, const PairById&) = default;
  friend auto operator<=>(const PairById&, const PairById&) = default;
};
struct PairByDepositHash {
  std::string tx_hash;
  friend bool operator==(const PairByDepositHash&, const PairByDepositHash&) = default;
  friend auto operator<=>(const PairByDepositHash&, const PairByDepositHash&) = default;
};
struct PairExternal {
  std::string key;
  friend bool operator==(const PairExternal&, const PairExternal&) = default;
  friend auto operator<=>(const PairExternal&, const PairExternal&) = default;
};
using PairKey = std::variant<PairById, PairByDepositHash, PairExternal>;

std::string to_string(const PairKey& key);

/// Total order over trace events: block time first so cross-chain
/// interleaving is reproducible, then chain name, block, log index.
/// tx_hash closes the order for fixtures that reuse log indices across
/// transactions of one block.
struct EventOrderKey {
  UnixTime block_time = 0;
  std::string_view chain;
  std::uint64_t block = 0;
  std::uint64_t log_index = 0;
  std::string_view tx_hash;

  friend auto operator<=>(const EventOrderKey&, const EventOrderKey&) = default;
  friend bool operator==(const EventOrderKey&, const EventOrderKey&) = default;
};

/// True for "0x" followed by one or more '0' digits (mint/burn address).
bool is_zero_address(std::string_view address);

std::string to_lower(std::string_view s);

}  // namespace bridgeaudit

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include "bridgeaudit/config.hpp"
#include "bridgeaudit/ingest.hpp"

namespace bridgeaudit {

/// Two deposits expose the same pairing handle.
class DuplicateDepositKey : public std::runtime_error {
 public:
  DuplicateDepositKey(PairKey key, TxRef first, TxRef second);

  const PairKey& key() const noexcept { return key_; }
  const TxRef& first() const noexcept { return first_; }
  const TxRef& second() const noexcept { return second_; }

 private:
  PairKey key_;
  TxRef first_;
  TxRef second_;
};

/// Out-of-band key -> deposit transaction, as provided by bridge query
/// APIs. Keys are opaque strings; a withdrawal either names one via
/// pair_by.ext or is looked up by its own tx hash.
struct ExternalTarget {
  ChainId chain;
  std::string deposit_tx;
  friend bool operator==(const ExternalTarget&, const ExternalTarget&) = default;
};
using ExternalMap = std::map<std::string, ExternalTarget, std::less<>>;

/// Reads {"key","deposit_tx","chain"} lines. Throws ConfigError on a bad
/// line and DuplicateDepositKey when one key names two deposits.
ExternalMap parse_external_map(std::istream& in);
ExternalMap load_external_map(const std::filesystem::path& path);

/// Pairing handles of one bridge's deposits. Immutable once built.
class DepositIndex {
 public:
  explicit DepositIndex(std::string bridge_id, ExternalMap external = {});

  /// Indexes ById (when deposit_id is present) and ByDepositHash. Throws
  /// DuplicateDepositKey when a handle already points at another deposit.
  void add(const ChainEvent& deposit);

  const std::string& bridge_id() const noexcept { return bridge_id_; }
  std::size_t size() const noexcept { return deposits_.size(); }
  const ChainEvent* find(const PairKey& key) const;
  const ChainEvent* deposit(const TxRef& ref) const;
  bool has_external(std::string_view key) const { return external_.count(key) > 0; }

 private:
  std::string bridge_id_;
  ExternalMap external_;
  std::map<TxRef, ChainEvent> deposits_;
  std::map<std::uint64_t, TxRef> by_id_;
  std::map<std::string, TxRef, std::less<>> by_hash_;
};

DepositIndex build_index(const std::string& bridge_id, std::span<const ChainEvent> deposits,
                         const ExternalMap& external = {});

namespace pair {
struct Matched {
  const ChainEvent* deposit = nullptr;
};
/// A handle was present but names nothing in the index.
struct NoDeposit {
  PairKey key;
};
/// No usable handle at all.
struct Unpairable {};
}  // namespace pair

using PairOutcome = std::variant<pair::Matched, pair::NoDeposit, pair::Unpairable>;

/// Matches a withdrawal to its backing deposit. Strategies not enabled
/// for the bridge are treated as absent handles.
PairOutcome pair_withdrawal(const ChainEvent& withdrawal, const DepositIndex& index,
                            const BridgeConfig& bridge);

}  // namespace bridgeaudit

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bridgeaudit/config.hpp"
#include "bridgeaudit/model.hpp"

namespace bridgeaudit {

enum class EventKind { Deposit, Withdrawal, Transfer };

std::string_view to_string(EventKind k);

struct DepositBody {
  std::optional<std::uint64_t> deposit_id;
  TokenId token;
  std::optional<Amount> claimed_amount;
  std::string depositor;
  std::optional<std::string> recipient;
  std::optional<ChainId> dest_chain;
  std::optional<Amount> explicit_fee;
};

struct WithdrawalBody {
  std::optional<PairKey> pair_ref;
  TokenId token;
  std::optional<Amount> claimed_amount;
  std::string recipient;
  std::optional<ChainId> source_chain;
};

struct TransferBody {
  TokenId token;
  std::string from;
  std::string to;
  Amount value;
};

struct ChainEvent {
  TxRef ref;
  std::uint64_t block = 0;
  UnixTime block_time = 0;
  std::string bridge_id;
  std::variant<DepositBody, WithdrawalBody, TransferBody> body;

  EventKind kind() const { return static_cast<EventKind>(body.index()); }
  const DepositBody& deposit() const { return std::get<DepositBody>(body); }
  const WithdrawalBody& withdrawal() const { return std::get<WithdrawalBody>(body); }
  const TransferBody& transfer() const { return std::get<TransferBody>(body); }

  EventOrderKey order_key() const {
    return {block_time, ref.chain.name(), block, ref.log_index, ref.tx_hash};
  }
};

/// Strict total order used everywhere events are sequenced.
inline bool event_order_less(const ChainEvent& a, const ChainEvent& b) {
  return a.order_key() < b.order_key();
}

/// Envelope of a record whose kind-specific fields could not be decoded.
/// Withdrawal placeholders still yield an Undecodable finding downstream.
struct UndecodableRecord {
  TxRef ref;
  std::uint64_t block = 0;
  UnixTime block_time = 0;
  std::string bridge_id;
  EventKind kind = EventKind::Withdrawal;
};

struct ParseError {
  enum class Kind { Malformed, Undecodable };
  std::size_t line = 0;  // 1-based
  Kind kind = Kind::Malformed;
  std::string reason;
  std::optional<UndecodableRecord> record;
};

struct ParseResult {
  std::vector<ChainEvent> events;
  std::vector<ParseError> errors;
};

/// Decodes one log line. `line_no` is only used for error reporting.
std::variant<ChainEvent, ParseError> parse_event_line(std::string_view line, std::size_t line_no);

/// Parses a newline-delimited log, continuing past bad records. When
/// `chain` is set, records naming another chain are rejected, and
/// block_time must be non-decreasing within the file.
ParseResult parse_event_log(std::istream& in, const std::optional<ChainId>& chain = std::nullopt);

nlohmann::json to_json(const ChainEvent& e);
/// One canonical log line (no trailing newline).
std::string serialize_event(const ChainEvent& e);

enum class AmountSource { BridgeEvent, AdjacentTransfer, InternalTransaction };

std::string_view to_string(AmountSource s);

struct ResolvedAmount {
  Amount amount;
  AmountSource source = AmountSource::BridgeEvent;
  bool scaled = false;

  friend bool operator==(const ResolvedAmount&, const ResolvedAmount&) = default;
};

struct AmountUnresolvable {
  std::string reason;
  friend bool operator==(const AmountUnresolvable&, const AmountUnresolvable&) = default;
};

using Resolution = std::variant<ResolvedAmount, AmountUnresolvable>;

/// Establishes how many tokens a deposit or withdrawal actually moved.
/// `adjacent` holds the Transfer events of the same transaction, ordered
/// by log index.
Resolution resolve_amount(const ChainEvent& event, std::span<const ChainEvent> adjacent,
                          const BridgeConfig& bridge);

/// Transfer events grouped by (chain, tx_hash), each group in log-index order.
class TransferIndex {
 public:
  TransferIndex() = default;
  explicit TransferIndex(std::span<const ChainEvent> events);

  void add(const ChainEvent& transfer);
  std::span<const ChainEvent> in_tx(const TxRef& ref) const;

 private:
  std::map<std::pair<ChainId, std::string>, std::vector<ChainEvent>> by_tx_;
};

}  // namespace bridgeaudit

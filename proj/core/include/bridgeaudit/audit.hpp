#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bridgeaudit/config.hpp"
#include "bridgeaudit/ingest.hpp"
#include "bridgeaudit/pairing.hpp"

namespace bridgeaudit {

/// Mechanical verdicts, listed in check priority after Balanced.
enum class Category {
  Balanced,
  Undecodable,
  Unpairable,
  UnbackedWithdrawal,
  DoubleSpend,
  DestinationMismatch,
  TokenMismatch,
  AmountExceedsInflow,
  ZeroWithdrawal,
  MissingRecipient,
  TestToken,
};

inline constexpr std::size_t kCategoryCount = 11;

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view s);

/// TestToken is a report label: it never suppresses a violation and on
/// its own does not count as one.
constexpr bool is_label(Category c) { return c == Category::TestToken; }
constexpr bool is_violation(Category c) { return c != Category::Balanced && !is_label(c); }

struct Finding {
  Category category = Category::Balanced;
  TxRef withdrawal;
  std::optional<TxRef> deposit;
  std::optional<Amount> inflow;
  Amount outflow;
  std::optional<Amount> max_allowed;
  std::string note;

  // Evidence carried for reporting.
  std::string bridge;
  UnixTime block_time = 0;
  std::optional<TokenId> token;
  std::string recipient;
  bool test_token = false;

  /// Stable identity used for alert dedup: withdrawal ref + category.
  std::string id() const;

  friend bool operator==(const Finding&, const Finding&) = default;
};

/// deposit -> first redeeming withdrawal. Insert-once.
class RedemptionLedger {
 public:
  virtual ~RedemptionLedger() = default;
  virtual std::optional<TxRef> redeemer(const TxRef& deposit) const = 0;
  /// Compare-and-set. Returns the prior redeemer, or nullopt when this
  /// call recorded `withdrawal`. Re-marking the same pair returns it.
  virtual std::optional<TxRef> mark_redeemed(const TxRef& deposit, const TxRef& withdrawal) = 0;
};

class MemoryLedger final : public RedemptionLedger {
 public:
  std::optional<TxRef> redeemer(const TxRef& deposit) const override;
  std::optional<TxRef> mark_redeemed(const TxRef& deposit, const TxRef& withdrawal) override;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<TxRef, TxRef>& entries() const noexcept { return entries_; }

 private:
  std::map<TxRef, TxRef> entries_;
};

/// Hex digest over sorted (deposit, withdrawal) entries.
std::string ledger_digest(const std::map<TxRef, TxRef>& entries);

/// Largest outflow the invariant allows for `inflow`. Never exceeds inflow.
Amount compute_max_outflow(const Amount& inflow, const FeePolicy& policy,
                           const std::optional<Amount>& explicit_fee);

enum class PairStatus { Matched, NoDeposit, Unpairable };

struct BridgeTransaction {
  ChainEvent withdrawal;
  Resolution outflow;
  PairStatus pairing = PairStatus::Unpairable;
  std::optional<ChainEvent> deposit;  // set iff Matched
  std::optional<Resolution> inflow;   // set iff deposit is
  std::string pair_note;
};

struct AuditOptions {
  /// Require outflow == inflow - fee exactly instead of <=.
  bool strict_fees = false;
  /// Test hook: disables the already-redeemed check.
  bool check_double_spend = true;
};

/// Applies the checks in fixed priority and updates the ledger for
/// Balanced and amount-consuming verdicts.
Finding audit_withdrawal(const BridgeTransaction& bt, RedemptionLedger& ledger,
                         const BridgeConfig& bridge, const AuditOptions& options = {});

struct BridgeError {
  std::string bridge;
  std::string reason;
};

struct AuditSummary {
  std::size_t analyzed = 0;
  std::map<Category, std::size_t> counts;
  std::map<std::string, std::map<Category, std::size_t>> per_bridge;
  std::vector<BridgeError> errors;

  std::size_t violations() const;
  void add(const Finding& f);
};

struct AuditReport {
  std::vector<Finding> findings;  // one per withdrawal, in event order
  AuditSummary summary;
};

/// Incremental auditor shared by the batch driver and the live monitor.
/// Deposits are registered as they are seen; withdrawals must be
/// presented in event order.
class AuditEngine {
 public:
  AuditEngine(const AuditConfig& config, RedemptionLedger& ledger, AuditOptions options = {},
              ExternalMap external = {});

  /// Throws DuplicateDepositKey; the caller decides whether that bridge
  /// is abandoned (see mark_failed).
  void add_deposit(const ChainEvent& deposit, Resolution inflow);
  bool has_deposit(const TxRef& ref) const;

  void mark_failed(const std::string& bridge, std::string reason);
  bool failed(const std::string& bridge) const { return failed_.count(bridge) > 0; }

  /// Pairs and audits one withdrawal. A backing deposit that sorts after
  /// the withdrawal in event order does not count.
  Finding audit(const ChainEvent& withdrawal, const Resolution& outflow);
  Finding audit_undecodable(const UndecodableRecord& record, const std::string& reason);

  const AuditConfig& config() const noexcept { return config_; }

 private:
  DepositIndex& index_for(const std::string& bridge);

  const AuditConfig& config_;
  RedemptionLedger& ledger_;
  AuditOptions options_;
  ExternalMap external_;
  std::map<std::string, DepositIndex, std::less<>> indices_;
  std::map<TxRef, Resolution> inflows_;
  std::map<std::string, std::string, std::less<>> failed_;
};

/// Resolves every deposit and withdrawal amount of a trace.
std::map<TxRef, Resolution> resolve_all(std::span<const ChainEvent> events, const AuditConfig& cfg);

/// Batch audit of a whole trace. Withdrawal placeholders from parse
/// errors become Undecodable findings; bridges with duplicate deposit
/// keys are reported in summary.errors and skipped.
AuditReport audit_trace(std::span<const ChainEvent> events, const AuditConfig& cfg,
                        const AuditOptions& options = {}, const ExternalMap& external = {},
                        std::span<const ParseError> undecodable = {});

using SignedAmount = boost::multiprecision::cpp_int;

struct FlowPoint {
  UnixTime t = 0;  // bucket start
  SignedAmount value;
};

struct FlowSeries {
  std::string bridge;
  TokenId token_class;  // representative of the equivalence class
  std::vector<FlowPoint> points;
};

/// Cumulative inflow minus outflow per (bridge, token class), sampled at
/// the end of each bucket. Every series shares one time axis. Throws
/// std::invalid_argument when bucket <= 0.
std::vector<FlowSeries> aggregate_flow(std::span<const ChainEvent> events, std::int64_t bucket,
                                       const AuditConfig& cfg);

}  // namespace bridgeaudit

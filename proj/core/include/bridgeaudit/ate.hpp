#pragma once

// Announce-then-execute withdrawals: a relayed withdrawal is first
// announced, then executed only after an approver has checked it against
// the source chain.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit::ate {

enum class TicketState { Announced, Approved, Rejected, Executed };

std::string_view to_string(TicketState s);

class TransitionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Enforces Announced->Approved->Executed and Announced->Rejected.
void check_transition(TicketState from, TicketState to);

/// Withdrawal request as delivered by the relayer.
struct Receipt {
  std::optional<std::uint64_t> deposit_id;
  std::optional<Amount> amount;
  std::string recipient;
  std::string tag;  // relayer signature stand-in
};

struct WithdrawalTicket {
  std::uint64_t id = 0;
  Receipt receipt;
  ChainEvent withdrawal;  // destination-chain view of the request
  TicketState state = TicketState::Announced;
  std::string decided_by;
  std::optional<Finding> reason;
  std::uint64_t steps = 0;
};

nlohmann::json to_json(const WithdrawalTicket& t);

class SimBridge;

struct Decision {
  bool approve = false;
  std::optional<Finding> finding;
};

class Approver {
 public:
  virtual ~Approver() = default;
  virtual std::string id() const = 0;
  virtual Decision decide(const WithdrawalTicket& ticket, const SimBridge& source) = 0;
};

/// Runs the audit engine over the source chain as the approver sees it.
/// Rejects exactly when the verdict is a violation.
class AuditingApprover final : public Approver {
 public:
  explicit AuditingApprover(const SimBridge& bridge);
  std::string id() const override { return "auditing"; }
  Decision decide(const WithdrawalTicket& ticket, const SimBridge& source) override;

 private:
  void sync(const SimBridge& source);

  AuditConfig config_;
  MemoryLedger ledger_;
  AuditEngine engine_;
  std::size_t seen_ = 0;  // source events already indexed
};

/// Approves everything.
class NaiveApprover final : public Approver {
 public:
  std::string id() const override { return "naive"; }
  Decision decide(const WithdrawalTicket&, const SimBridge&) override { return {true, {}}; }
};

/// Lock-and-mint bridge between two simulated chains with one token pair.
class SimBridge {
 public:
  struct Options {
    bool checks_enabled = true;       // signature tag + replay protection
    std::uint32_t fee_ppm = 1'000;    // proportional bridge fee
    std::string secret = "relayer-key";
  };

  SimBridge();
  explicit SimBridge(Options options);

  static inline const ChainId kSource{"bsc"};
  static inline const ChainId kDest{"ftm"};
  static inline const std::string kBridgeId = "ate";

  const TokenId& source_token() const noexcept { return source_token_; }
  const TokenId& dest_token() const noexcept { return dest_token_; }
  const std::string& bridge_address() const noexcept { return bridge_address_; }
  const BridgeConfig& config() const noexcept { return config_; }
  const Options& options() const noexcept { return options_; }

  /// Credits source-chain tokens to a user (faucet).
  void fund(const std::string& user, const Amount& amount);
  /// Locks `amount` from `user`; returns the deposit id. Throws
  /// std::invalid_argument when the user's balance is short.
  std::uint64_t deposit(const std::string& user, const Amount& amount,
                        const std::string& recipient);

  /// Source-chain events (deposits and their transfers) in order.
  const std::vector<ChainEvent>& source_events() const noexcept { return source_events_; }
  /// Recipient-to-be and amount of a recorded deposit.
  std::optional<std::pair<std::string, Amount>> deposit_info(std::uint64_t id) const;

  /// Tag a correctly keyed relayer would attach.
  std::string sign(const Receipt& r) const;
  /// Relayer output for a deposit: full amount after fee, valid tag.
  Receipt honest_receipt(std::uint64_t deposit_id) const;

  WithdrawalTicket announce_withdraw(const Receipt& receipt);
  /// Decides an Announced ticket; throws TransitionError otherwise.
  WithdrawalTicket& approve_withdraw(std::uint64_t ticket_id, Approver& approver);

  /// The unmodified bridge: verify and pay out in one call. Returns
  /// whether funds moved.
  bool withdraw_direct(const Receipt& receipt);

  const WithdrawalTicket& ticket(std::uint64_t id) const { return tickets_.at(id); }
  const std::map<std::uint64_t, WithdrawalTicket>& tickets() const noexcept { return tickets_; }

  Amount balance(const ChainId& chain, const std::string& address) const;
  const Amount& total_locked() const noexcept { return locked_; }
  const Amount& total_minted() const noexcept { return minted_; }
  /// Minted on the destination never exceeds locked on the source.
  bool collateralized() const { return minted_ <= locked_; }

 private:
  std::uint64_t tick() { return ++clock_; }
  ChainEvent make_withdrawal_event(std::uint64_t ticket_id, const Receipt& r);
  /// Signature and replay gate; empty string when the receipt passes.
  std::string gate(const Receipt& r, std::uint64_t& steps);
  void pay(const Receipt& r);

  Options options_;
  TokenId source_token_;
  TokenId dest_token_;
  std::string bridge_address_;
  BridgeConfig config_;
  std::uint64_t clock_ = 0;
  std::uint64_t next_deposit_ = 1;
  std::uint64_t next_ticket_ = 1;
  std::vector<ChainEvent> source_events_;
  std::map<std::uint64_t, std::size_t> deposit_at_;  // id -> index in source_events_
  std::set<std::uint64_t> consumed_;                 // replay protection
  std::map<std::uint64_t, WithdrawalTicket> tickets_;
  std::map<std::pair<ChainId, std::string>, Amount> balances_;
  Amount locked_;
  Amount minted_;
};

enum class TicketKind { Benign, OverWithdraw, Unbacked, DoubleSpend };

std::string_view to_string(TicketKind k);

struct ExperimentOptions {
  std::size_t total = 100;
  std::vector<TicketKind> malicious{TicketKind::OverWithdraw, TicketKind::Unbacked,
                                    TicketKind::DoubleSpend};
  bool checks_enabled = false;  // disabled to model a compromised relayer
  bool naive_approver = false;
};

struct TicketOutcome {
  std::size_t position = 0;
  TicketKind kind = TicketKind::Benign;
  TicketState state = TicketState::Announced;
  std::optional<Category> category;
  std::uint64_t steps = 0;
  nlohmann::json ticket;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::size_t executed = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> per_category;
  bool collateralized_throughout = true;
  std::vector<TicketOutcome> outcomes;  // in execution order

  /// Sorted (kind, state, category) triples; position-free.
  std::vector<std::string> outcome_multiset() const;
};

nlohmann::json to_json(const ExperimentReport& r);

/// 100 deposit/withdrawal pairs with random values, malicious ones at
/// seed-derived positions. Position 0 is always benign so a replay has
/// something to copy.
ExperimentReport run_correctness_experiment(std::uint64_t seed, const ExperimentOptions& options = {});

}  // namespace bridgeaudit::ate

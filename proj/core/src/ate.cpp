#include "bridgeaudit/ate.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "bridgeaudit/codec.hpp"
#include "bridgeaudit/digest.hpp"
#include "bridgeaudit/rng.hpp"

namespace bridgeaudit::ate {

using nlohmann::json;

std::string_view to_string(TicketState s) {
  switch (s) {
    case TicketState::Announced: return "Announced";
    case TicketState::Approved: return "Approved";
    case TicketState::Rejected: return "Rejected";
    case TicketState::Executed: return "Executed";
  }
  return "?";
}

std::string_view to_string(TicketKind k) {
  switch (k) {
    case TicketKind::Benign: return "benign";
    case TicketKind::OverWithdraw: return "over_withdraw";
    case TicketKind::Unbacked: return "unbacked";
    case TicketKind::DoubleSpend: return "double_spend";
  }
  return "?";
}

void check_transition(TicketState from, TicketState to) {
  const bool ok = (from == TicketState::Announced &&
                   (to == TicketState::Approved || to == TicketState::Rejected)) ||
                  (from == TicketState::Approved && to == TicketState::Executed);
  if (!ok) {
    throw TransitionError("illegal ticket transition " + std::string(to_string(from)) + " -> " +
                          std::string(to_string(to)));
  }
}

json to_json(const WithdrawalTicket& t) {
  json r = {{"deposit_id", t.receipt.deposit_id ? json(*t.receipt.deposit_id) : json(nullptr)},
            {"amount", t.receipt.amount ? json(t.receipt.amount->to_string()) : json(nullptr)},
            {"recipient", t.receipt.recipient}};
  return {{"id", t.id},
          {"state", std::string(to_string(t.state))},
          {"decided_by", t.decided_by},
          {"reason", t.reason ? to_json(*t.reason) : json(nullptr)},
          {"steps", t.steps},
          {"receipt", r}};
}

// ---- bridge ----

SimBridge::SimBridge() : SimBridge(Options{}) {}

SimBridge::SimBridge(Options options) : options_(std::move(options)) {
  source_token_ = TokenId{kSource, "0x" + sha256_hex("ate-token-src").substr(0, 40), "USDC", {}};
  dest_token_ = TokenId{kDest, "0x" + sha256_hex("ate-token-dst").substr(0, 40), "anyUSDC", {}};
  bridge_address_ = "0x" + sha256_hex("ate-bridge").substr(0, 40);

  config_.id = kBridgeId;
  config_.pairing = {PairingStrategy::ById};
  config_.addresses[kSource].insert(bridge_address_);
  config_.addresses[kDest].insert(bridge_address_);
  config_.default_fee = make_proportional(options_.fee_ppm);
  config_.equivalence.link(source_token_, dest_token_);
}

void SimBridge::fund(const std::string& user, const Amount& amount) {
  balances_[{kSource, user}] += amount;
}

std::uint64_t SimBridge::deposit(const std::string& user, const Amount& amount,
                                 const std::string& recipient) {
  auto& bal = balances_[{kSource, user}];
  auto left = checked_sub(bal, amount);
  if (!left) throw std::invalid_argument("insufficient balance for " + user);
  bal = *left;
  balances_[{kSource, bridge_address_}] += amount;
  locked_ += amount;

  const std::uint64_t id = next_deposit_++;
  const std::uint64_t block = tick();
  const std::string tx = "0x" + sha256_hex("ate-deposit-" + std::to_string(id));

  ChainEvent transfer;
  transfer.ref = TxRef{kSource, tx, 0};
  transfer.block = block;
  transfer.block_time = static_cast<UnixTime>(block);
  transfer.body = TransferBody{source_token_, user, bridge_address_, amount};

  ChainEvent dep;
  dep.ref = TxRef{kSource, tx, 1};
  dep.block = block;
  dep.block_time = static_cast<UnixTime>(block);
  dep.bridge_id = kBridgeId;
  dep.body = DepositBody{id, source_token_, amount, user, recipient, kDest, std::nullopt};

  source_events_.push_back(std::move(transfer));
  deposit_at_[id] = source_events_.size();
  source_events_.push_back(std::move(dep));
  return id;
}

std::optional<std::pair<std::string, Amount>> SimBridge::deposit_info(std::uint64_t id) const {
  const auto it = deposit_at_.find(id);
  if (it == deposit_at_.end()) return std::nullopt;
  const auto& d = source_events_[it->second].deposit();
  return std::pair{d.recipient.value_or(""), d.claimed_amount.value_or(Amount{})};
}

std::string SimBridge::sign(const Receipt& r) const {
  return sha256_hex(options_.secret + "|" +
                    (r.deposit_id ? std::to_string(*r.deposit_id) : std::string("-")) + "|" +
                    (r.amount ? r.amount->to_string() : std::string("-")) + "|" + r.recipient);
}

Receipt SimBridge::honest_receipt(std::uint64_t deposit_id) const {
  const auto info = deposit_info(deposit_id);
  if (!info) throw std::invalid_argument("no deposit " + std::to_string(deposit_id));
  Receipt r;
  r.deposit_id = deposit_id;
  r.amount = compute_max_outflow(info->second, config_.default_fee, std::nullopt);
  r.recipient = info->first;
  r.tag = sign(r);
  return r;
}

ChainEvent SimBridge::make_withdrawal_event(std::uint64_t ticket_id, const Receipt& r) {
  ChainEvent w;
  const std::uint64_t block = tick();
  w.ref = TxRef{kDest, "0x" + sha256_hex("ate-ticket-" + std::to_string(ticket_id)), 0};
  w.block = block;
  w.block_time = static_cast<UnixTime>(block);
  w.bridge_id = kBridgeId;
  WithdrawalBody body;
  if (r.deposit_id) body.pair_ref = PairById{kBridgeId, *r.deposit_id};
  body.token = dest_token_;
  body.claimed_amount = r.amount;
  body.recipient = r.recipient;
  body.source_chain = kSource;
  w.body = std::move(body);
  return w;
}

std::string SimBridge::gate(const Receipt& r, std::uint64_t& steps) {
  if (!options_.checks_enabled) return {};
  ++steps;
  if (r.tag != sign(r)) return "signature";
  ++steps;
  if (r.deposit_id && consumed_.count(*r.deposit_id)) return "replay";
  return {};
}

void SimBridge::pay(const Receipt& r) {
  balances_[{kDest, r.recipient}] += *r.amount;
  minted_ += *r.amount;
  if (r.deposit_id) consumed_.insert(*r.deposit_id);
}

WithdrawalTicket SimBridge::announce_withdraw(const Receipt& receipt) {
  WithdrawalTicket t;
  t.id = next_ticket_++;
  t.receipt = receipt;
  t.withdrawal = make_withdrawal_event(t.id, receipt);
  t.steps = 1;  // decode
  if (!receipt.amount || receipt.recipient.empty()) {
    Finding f;
    f.category = Category::Undecodable;
    f.withdrawal = t.withdrawal.ref;
    f.bridge = kBridgeId;
    f.block_time = t.withdrawal.block_time;
    f.note = !receipt.amount ? "receipt has no amount" : "receipt has no recipient";
    t.state = TicketState::Rejected;
    t.decided_by = "announce:decode";
    t.reason = std::move(f);
  } else if (auto why = gate(receipt, t.steps); !why.empty()) {
    t.state = TicketState::Rejected;
    t.decided_by = "announce:" + why;
  }
  ++t.steps;  // store
  tickets_[t.id] = t;
  return t;
}

WithdrawalTicket& SimBridge::approve_withdraw(std::uint64_t ticket_id, Approver& approver) {
  auto it = tickets_.find(ticket_id);
  if (it == tickets_.end()) throw std::out_of_range("no ticket " + std::to_string(ticket_id));
  WithdrawalTicket& t = it->second;
  if (t.state != TicketState::Announced) {
    throw TransitionError("ticket " + std::to_string(ticket_id) + " is " +
                          std::string(to_string(t.state)) + ", not Announced");
  }
  // Replay is re-checked here: two announcements of one receipt can
  // both be pending.
  if (options_.checks_enabled && t.receipt.deposit_id && consumed_.count(*t.receipt.deposit_id)) {
    check_transition(t.state, TicketState::Rejected);
    t.state = TicketState::Rejected;
    t.decided_by = "approve:replay";
    t.steps += 2;
    return t;
  }
  Decision d = approver.decide(t, *this);
  ++t.steps;
  t.decided_by = approver.id();
  if (!d.approve) {
    check_transition(t.state, TicketState::Rejected);
    t.state = TicketState::Rejected;
    t.reason = std::move(d.finding);
    ++t.steps;
    return t;
  }
  check_transition(t.state, TicketState::Approved);
  t.state = TicketState::Approved;
  ++t.steps;
  check_transition(t.state, TicketState::Executed);
  pay(t.receipt);
  t.state = TicketState::Executed;
  t.steps += 2;
  return t;
}

bool SimBridge::withdraw_direct(const Receipt& receipt) {
  std::uint64_t steps = 0;
  if (!receipt.amount || receipt.recipient.empty()) return false;
  if (!gate(receipt, steps).empty()) return false;
  tick();
  pay(receipt);
  return true;
}

Amount SimBridge::balance(const ChainId& chain, const std::string& address) const {
  const auto it = balances_.find({chain, address});
  return it == balances_.end() ? Amount{} : it->second;
}

// ---- approvers ----

AuditingApprover::AuditingApprover(const SimBridge& bridge)
    : config_([&] {
        AuditConfig c;
        c.chains = {ChainInfo{SimBridge::kSource, 0}, ChainInfo{SimBridge::kDest, 0}};
        c.bridges.emplace(bridge.config().id, bridge.config());
        return c;
      }()),
      engine_(config_, ledger_) {}

void AuditingApprover::sync(const SimBridge& source) {
  const auto& events = source.source_events();
  TransferIndex transfers;
  for (std::size_t i = seen_; i < events.size(); ++i) {
    if (events[i].kind() == EventKind::Transfer) transfers.add(events[i]);
  }
  const BridgeConfig& bridge = config_.bridge(SimBridge::kBridgeId);
  for (std::size_t i = seen_; i < events.size(); ++i) {
    if (events[i].kind() != EventKind::Deposit) continue;
    engine_.add_deposit(events[i], resolve_amount(events[i], transfers.in_tx(events[i].ref), bridge));
  }
  seen_ = events.size();
}

Decision AuditingApprover::decide(const WithdrawalTicket& ticket, const SimBridge& source) {
  sync(source);
  const Resolution outflow = ResolvedAmount{ticket.receipt.amount.value_or(Amount{}),
                                            AmountSource::BridgeEvent, false};
  Finding f = engine_.audit(ticket.withdrawal, outflow);
  if (is_violation(f.category)) return {false, std::move(f)};
  return {true, std::nullopt};
}

// ---- experiment ----

std::vector<std::string> ExperimentReport::outcome_multiset() const {
  std::vector<std::string> out;
  out.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    out.push_back(std::string(to_string(o.kind)) + "/" + std::string(to_string(o.state)) + "/" +
                  (o.category ? std::string(to_string(*o.category)) : std::string("-")));
  }
  std::sort(out.begin(), out.end());
  return out;
}

json to_json(const ExperimentReport& r) {
  json outcomes = json::array();
  for (const auto& o : r.outcomes) {
    outcomes.push_back({{"position", o.position},
                        {"kind", std::string(to_string(o.kind))},
                        {"state", std::string(to_string(o.state))},
                        {"category", o.category ? json(std::string(to_string(*o.category)))
                                                : json(nullptr)},
                        {"steps", o.steps}});
  }
  return {{"seed", r.seed},
          {"executed", r.executed},
          {"rejected", r.rejected},
          {"per_category", r.per_category},
          {"collateralized_throughout", r.collateralized_throughout},
          {"outcomes", outcomes}};
}

namespace {

Amount random_amount(std::mt19937_64& rng) {
  // Up to a million whole tokens at 6 decimals.
  return Amount::from_int(Amount::Int(uniform_between(rng, 1, 1'000'000'000'000ULL)) * 1'000'000);
}

}  // namespace

ExperimentReport run_correctness_experiment(std::uint64_t seed, const ExperimentOptions& options) {
  if (options.total == 0 || options.malicious.size() >= options.total) {
    throw std::invalid_argument("experiment needs more tickets than malicious ones");
  }
  std::mt19937_64 rng(seed);
  SimBridge bridge(SimBridge::Options{options.checks_enabled, 1'000, "relayer-key"});
  std::unique_ptr<Approver> approver;
  if (options.naive_approver) {
    approver = std::make_unique<NaiveApprover>();
  } else {
    approver = std::make_unique<AuditingApprover>(bridge);
  }

  // Partial Fisher-Yates over positions 1..total-1.
  std::vector<std::size_t> slots(options.total - 1);
  std::iota(slots.begin(), slots.end(), 1);
  std::vector<TicketKind> kinds(options.total, TicketKind::Benign);
  for (std::size_t j = 0; j < options.malicious.size(); ++j) {
    const std::size_t k = j + uniform_below(rng, slots.size() - j);
    std::swap(slots[j], slots[k]);
    kinds[slots[j]] = options.malicious[j];
  }

  ExperimentReport report;
  report.seed = seed;
  std::vector<Receipt> paid;  // benign receipts that executed
  for (std::size_t pos = 0; pos < options.total; ++pos) {
    const TicketKind kind = kinds[pos];
    const std::string user = "0x" + sha256_hex("ate-user-" + std::to_string(pos)).substr(0, 40);
    Receipt r;
    switch (kind) {
      case TicketKind::Benign:
      case TicketKind::OverWithdraw: {
        const Amount amount = random_amount(rng);
        bridge.fund(user, amount);
        const auto id = bridge.deposit(user, amount, user);
        r = bridge.honest_receipt(id);
        if (kind == TicketKind::OverWithdraw) {
          r.amount = amount + Amount(uniform_between(rng, 1, 1'000'000));
          r.tag = "forged";
        }
        break;
      }
      case TicketKind::Unbacked:
        r.deposit_id = 1'000'000'000 + pos;
        r.amount = random_amount(rng);
        r.recipient = user;
        r.tag = "forged";
        break;
      case TicketKind::DoubleSpend:
        if (paid.empty()) throw std::logic_error("no executed ticket to replay");
        r = paid[uniform_below(rng, paid.size())];
        break;
    }

    WithdrawalTicket t = bridge.announce_withdraw(r);
    if (t.state == TicketState::Announced) t = bridge.approve_withdraw(t.id, *approver);
    if (!bridge.collateralized()) report.collateralized_throughout = false;

    TicketOutcome o;
    o.position = pos;
    o.kind = kind;
    o.state = t.state;
    if (t.reason) o.category = t.reason->category;
    o.steps = t.steps;
    o.ticket = to_json(t);
    if (t.state == TicketState::Executed) {
      ++report.executed;
      if (kind == TicketKind::Benign) paid.push_back(r);
    } else {
      ++report.rejected;
      report.per_category[o.category ? std::string(to_string(*o.category)) : t.decided_by]++;
    }
    report.outcomes.push_back(std::move(o));
  }
  return report;
}

}  // namespace bridgeaudit::ate

#include "bridgeaudit/audit.hpp"

#include <algorithm>
#include <array>

#include "bridgeaudit/digest.hpp"

namespace bridgeaudit {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "Balanced",          "Undecodable",     "Unpairable",          "UnbackedWithdrawal",
    "DoubleSpend",       "DestinationMismatch", "TokenMismatch",   "AmountExceedsInflow",
    "ZeroWithdrawal",    "MissingRecipient", "TestToken",
};

}  // namespace

std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<Category> parse_category(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<Category>(i);
  }
  return std::nullopt;
}

std::string Finding::id() const {
  return withdrawal.to_string() + "/" + std::string(to_string(category));
}

std::optional<TxRef> MemoryLedger::redeemer(const TxRef& deposit) const {
  const auto it = entries_.find(deposit);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<TxRef> MemoryLedger::mark_redeemed(const TxRef& deposit, const TxRef& withdrawal) {
  const auto [it, inserted] = entries_.emplace(deposit, withdrawal);
  if (inserted) return std::nullopt;
  return it->second;
}

std::string ledger_digest(const std::map<TxRef, TxRef>& entries) {
  std::string buf;
  for (const auto& [d, w] : entries) {
    buf += d.to_string();
    buf += '>';
    buf += w.to_string();
    buf += '\n';
  }
  return sha256_hex(buf);
}

Amount compute_max_outflow(const Amount& inflow, const FeePolicy& policy,
                           const std::optional<Amount>& explicit_fee) {
  struct Visitor {
    const Amount& inflow;
    const std::optional<Amount>& explicit_fee;

    Amount operator()(const fee::Explicit&) const {
      // A missing explicit fee is taken as zero.
      if (!explicit_fee) return inflow;
      return checked_sub(inflow, *explicit_fee).value_or(Amount{0});
    }
    Amount operator()(const fee::Fixed& f) const {
      return checked_sub(inflow, f.amount).value_or(Amount{0});
    }
    Amount operator()(const fee::Proportional& p) const {
      const Amount cost = inflow.mul_div_floor(Amount{p.ppm}, Amount{1'000'000});
      return *checked_sub(inflow, cost);
    }
    Amount operator()(const fee::Indeterminate&) const { return inflow; }
  };
  return std::visit(Visitor{inflow, explicit_fee}, policy);
}

namespace {

const TokenId& token_of(const ChainEvent& e) {
  return e.kind() == EventKind::Deposit ? e.deposit().token : e.withdrawal().token;
}

Finding base_finding(const BridgeTransaction& bt, const BridgeConfig& bridge) {
  Finding f;
  const auto& w = bt.withdrawal;
  f.withdrawal = w.ref;
  f.bridge = w.bridge_id;
  f.block_time = w.block_time;
  if (w.kind() == EventKind::Withdrawal) {
    f.token = w.withdrawal().token;
    f.recipient = w.withdrawal().recipient;
    f.test_token = bridge.flags_for(w.withdrawal().token).has(TokenFlag::TestToken);
  }
  if (const auto* out = std::get_if<ResolvedAmount>(&bt.outflow)) f.outflow = out->amount;
  if (bt.deposit) {
    f.deposit = bt.deposit->ref;
    if (bridge.flags_for(bt.deposit->deposit().token).has(TokenFlag::TestToken)) {
      f.test_token = true;
    }
  }
  if (bt.inflow) {
    if (const auto* in = std::get_if<ResolvedAmount>(&*bt.inflow)) f.inflow = in->amount;
  }
  return f;
}

void append_note(std::string& note, std::string_view text) {
  if (!note.empty()) note += "; ";
  note += text;
}

}  // namespace

Finding audit_withdrawal(const BridgeTransaction& bt, RedemptionLedger& ledger,
                         const BridgeConfig& bridge, const AuditOptions& options) {
  Finding f = base_finding(bt, bridge);
  f.note = bt.pair_note;

  // (1) amounts must be known on every present leg
  if (const auto* u = std::get_if<AmountUnresolvable>(&bt.outflow)) {
    f.category = Category::Undecodable;
    append_note(f.note, "outflow: " + u->reason);
    return f;
  }
  if (bt.inflow) {
    if (const auto* u = std::get_if<AmountUnresolvable>(&*bt.inflow)) {
      f.category = Category::Undecodable;
      append_note(f.note, "inflow: " + u->reason);
      return f;
    }
  }
  // (2), (3) pairing
  if (bt.pairing == PairStatus::Unpairable) {
    f.category = Category::Unpairable;
    return f;
  }
  if (bt.pairing == PairStatus::NoDeposit || !bt.deposit) {
    f.category = Category::UnbackedWithdrawal;
    return f;
  }

  const ChainEvent& dep = *bt.deposit;
  const DepositBody& db = dep.deposit();
  const Amount& inflow = std::get<ResolvedAmount>(*bt.inflow).amount;
  const Amount& outflow = f.outflow;

  // (4) already redeemed by someone else; the ledger is left untouched
  if (options.check_double_spend) {
    if (auto prior = ledger.redeemer(dep.ref); prior && *prior != bt.withdrawal.ref) {
      f.category = Category::DoubleSpend;
      append_note(f.note, "deposit first redeemed by " + prior->to_string());
      return f;
    }
  }

  // (5)-(10): every condition is evaluated; the first one names the
  // finding and the rest are listed in the note.
  std::vector<Category> hits;
  if (db.dest_chain && *db.dest_chain != bt.withdrawal.ref.chain) {
    hits.push_back(Category::DestinationMismatch);
  }
  if (!bridge.equivalence.equivalent(db.token, token_of(bt.withdrawal))) {
    hits.push_back(Category::TokenMismatch);
  }
  const Amount max_out = compute_max_outflow(inflow, bridge.fee_for(db.token), db.explicit_fee);
  f.max_allowed = max_out;
  if (outflow > max_out) {
    hits.push_back(Category::AmountExceedsInflow);
  } else if (options.strict_fees && outflow < max_out) {
    hits.push_back(Category::AmountExceedsInflow);
    append_note(f.note, "strict fees: outflow below inflow minus fee");
  }
  if (outflow.is_zero() && !inflow.is_zero()) hits.push_back(Category::ZeroWithdrawal);
  if (!db.recipient) hits.push_back(Category::MissingRecipient);
  if (f.test_token) hits.push_back(Category::TestToken);

  f.category = hits.empty() ? Category::Balanced : hits.front();
  if (hits.size() > 1) {
    std::string also = "also";
    for (std::size_t i = 1; i < hits.size(); ++i) {
      also += (i == 1 ? ": " : ", ");
      also += to_string(hits[i]);
    }
    append_note(f.note, also);
  }

  if (auto prior = ledger.mark_redeemed(dep.ref, bt.withdrawal.ref);
      prior && *prior != bt.withdrawal.ref && options.check_double_spend) {
    // Lost a race with a concurrent marker: report it as the double spend.
    f.category = Category::DoubleSpend;
    f.max_allowed.reset();
    append_note(f.note, "deposit first redeemed by " + prior->to_string());
  }
  return f;
}

std::size_t AuditSummary::violations() const {
  std::size_t n = 0;
  for (const auto& [c, k] : counts) {
    if (is_violation(c)) n += k;
  }
  return n;
}

void AuditSummary::add(const Finding& f) {
  ++analyzed;
  ++counts[f.category];
  ++per_bridge[f.bridge][f.category];
}

AuditEngine::AuditEngine(const AuditConfig& config, RedemptionLedger& ledger, AuditOptions options,
                         ExternalMap external)
    : config_(config), ledger_(ledger), options_(options), external_(std::move(external)) {}

DepositIndex& AuditEngine::index_for(const std::string& bridge) {
  auto it = indices_.find(bridge);
  if (it == indices_.end()) it = indices_.emplace(bridge, DepositIndex(bridge, external_)).first;
  return it->second;
}

void AuditEngine::add_deposit(const ChainEvent& deposit, Resolution inflow) {
  index_for(deposit.bridge_id).add(deposit);
  inflows_.insert_or_assign(deposit.ref, std::move(inflow));
}

bool AuditEngine::has_deposit(const TxRef& ref) const { return inflows_.count(ref) > 0; }

void AuditEngine::mark_failed(const std::string& bridge, std::string reason) {
  failed_.emplace(bridge, std::move(reason));
}

Finding AuditEngine::audit(const ChainEvent& withdrawal, const Resolution& outflow) {
  const BridgeConfig& bridge = config_.bridge(withdrawal.bridge_id);
  BridgeTransaction bt{withdrawal, outflow, PairStatus::Unpairable, std::nullopt, std::nullopt, {}};

  const PairOutcome outcome = pair_withdrawal(withdrawal, index_for(withdrawal.bridge_id), bridge);
  if (const auto* m = std::get_if<pair::Matched>(&outcome)) {
    if (m->deposit->order_key() < withdrawal.order_key()) {
      bt.pairing = PairStatus::Matched;
      bt.deposit = *m->deposit;
      bt.inflow = inflows_.at(m->deposit->ref);
    } else {
      bt.pairing = PairStatus::NoDeposit;
      bt.pair_note = "referenced deposit " + m->deposit->ref.to_string() + " is not earlier";
    }
  } else if (const auto* n = std::get_if<pair::NoDeposit>(&outcome)) {
    bt.pairing = PairStatus::NoDeposit;
    bt.pair_note = "no deposit for " + to_string(n->key);
  }
  return audit_withdrawal(bt, ledger_, bridge, options_);
}

Finding AuditEngine::audit_undecodable(const UndecodableRecord& record, const std::string& reason) {
  ChainEvent w;
  w.ref = record.ref;
  w.block = record.block;
  w.block_time = record.block_time;
  w.bridge_id = record.bridge_id;
  w.body = WithdrawalBody{};
  BridgeTransaction bt{w, AmountUnresolvable{reason}, PairStatus::Unpairable, std::nullopt,
                       std::nullopt, {}};
  Finding f = audit_withdrawal(bt, ledger_, config_.bridge(record.bridge_id), options_);
  f.token.reset();
  return f;
}

std::map<TxRef, Resolution> resolve_all(std::span<const ChainEvent> events, const AuditConfig& cfg) {
  const TransferIndex transfers(events);
  std::map<TxRef, Resolution> out;
  for (const auto& e : events) {
    if (e.kind() == EventKind::Transfer) continue;
    out.emplace(e.ref, resolve_amount(e, transfers.in_tx(e.ref), cfg.bridge(e.bridge_id)));
  }
  return out;
}

AuditReport audit_trace(std::span<const ChainEvent> events, const AuditConfig& cfg,
                        const AuditOptions& options, const ExternalMap& external,
                        std::span<const ParseError> undecodable) {
  std::vector<const ChainEvent*> ordered;
  ordered.reserve(events.size());
  for (const auto& e : events) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const ChainEvent* a, const ChainEvent* b) { return event_order_less(*a, *b); });

  const std::map<TxRef, Resolution> amounts = resolve_all(events, cfg);

  MemoryLedger ledger;
  AuditEngine engine(cfg, ledger, options, external);
  AuditReport report;

  // All deposits are indexed up front so duplicate keys fail the bridge
  // before any of its withdrawals is judged.
  for (const ChainEvent* e : ordered) {
    if (e->kind() != EventKind::Deposit || engine.failed(e->bridge_id)) continue;
    try {
      engine.add_deposit(*e, amounts.at(e->ref));
    } catch (const DuplicateDepositKey& dup) {
      engine.mark_failed(e->bridge_id, dup.what());
      report.summary.errors.push_back({e->bridge_id, dup.what()});
    }
  }

  // Undecodable withdrawals join the ordered stream by their envelope.
  std::vector<const ParseError*> placeholders;
  for (const auto& err : undecodable) {
    if (err.record && err.record->kind == EventKind::Withdrawal) placeholders.push_back(&err);
  }
  auto placeholder_key = [](const ParseError* p) {
    const auto& r = *p->record;
    return EventOrderKey{r.block_time, r.ref.chain.name(), r.block, r.ref.log_index, r.ref.tx_hash};
  };
  std::sort(placeholders.begin(), placeholders.end(),
            [&](const ParseError* a, const ParseError* b) {
              return placeholder_key(a) < placeholder_key(b);
            });

  auto emit = [&](Finding f) {
    report.summary.add(f);
    report.findings.push_back(std::move(f));
  };

  std::size_t pi = 0;
  for (const ChainEvent* e : ordered) {
    if (e->kind() != EventKind::Withdrawal) continue;
    while (pi < placeholders.size() && placeholder_key(placeholders[pi]) < e->order_key()) {
      const auto* p = placeholders[pi++];
      if (!engine.failed(p->record->bridge_id)) emit(engine.audit_undecodable(*p->record, p->reason));
    }
    if (engine.failed(e->bridge_id)) continue;
    emit(engine.audit(*e, amounts.at(e->ref)));
  }
  for (; pi < placeholders.size(); ++pi) {
    const auto* p = placeholders[pi];
    if (!engine.failed(p->record->bridge_id)) emit(engine.audit_undecodable(*p->record, p->reason));
  }
  return report;
}

}  // namespace bridgeaudit

#include "bridgeaudit/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <limits>

#include <nlohmann/json.hpp>

namespace bridgeaudit {

using nlohmann::json;

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::Deposit: return "deposit";
    case EventKind::Withdrawal: return "withdrawal";
    case EventKind::Transfer: return "transfer";
  }
  return "?";
}

std::string_view to_string(AmountSource s) {
  switch (s) {
    case AmountSource::BridgeEvent: return "bridge_event";
    case AmountSource::AdjacentTransfer: return "adjacent_transfer";
    case AmountSource::InternalTransaction: return "internal_transaction";
  }
  return "?";
}

namespace {

// Thrown inside the decoder; converted to a ParseError at the boundary.
struct DecodeFailure {
  ParseError::Kind kind;
  std::string reason;
};

[[noreturn]] void malformed(std::string reason) {
  throw DecodeFailure{ParseError::Kind::Malformed, std::move(reason)};
}
[[noreturn]] void undecodable(std::string reason) {
  throw DecodeFailure{ParseError::Kind::Undecodable, std::move(reason)};
}

std::string req_string(const json& o, const char* key, bool envelope) {
  const auto it = o.find(key);
  if (it == o.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    const std::string msg = std::string(key) + " required";
    if (envelope) malformed(msg);
    undecodable(msg);
  }
  return it->get<std::string>();
}

std::optional<std::string> opt_string(const json& o, const char* key) {
  const auto it = o.find(key);
  if (it == o.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) undecodable(std::string(key) + " must be a string");
  return it->get<std::string>();
}

std::uint64_t req_uint(const json& o, const char* key) {
  const auto it = o.find(key);
  if (it == o.end()) malformed(std::string(key) + " required");
  if (!it->is_number_unsigned()) malformed(std::string(key) + " must be a non-negative integer");
  return it->get<std::uint64_t>();
}

std::optional<std::uint64_t> opt_uint(const json& o, const char* key) {
  const auto it = o.find(key);
  if (it == o.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned()) undecodable(std::string(key) + " must be a non-negative integer");
  return it->get<std::uint64_t>();
}

std::optional<Amount> opt_amount(const json& o, const char* key) {
  const auto s = opt_string(o, key);
  if (!s) return std::nullopt;
  auto a = Amount::parse(*s);
  if (!a) undecodable(std::string(key) + " must be a decimal string");
  return a;
}

Amount req_amount(const json& o, const char* key) {
  auto a = opt_amount(o, key);
  if (!a) undecodable(std::string(key) + " required");
  return *a;
}

TokenId token_on(const ChainId& chain, const std::string& raw) {
  TokenId t;
  t.chain = chain;
  t.address = to_lower(raw);
  return t;
}

std::optional<PairKey> decode_pair_by(const json& o, const std::string& bridge) {
  const auto it = o.find("pair_by");
  if (it == o.end() || it->is_null()) return std::nullopt;
  if (!it->is_object() || it->size() != 1) {
    undecodable("pair_by must hold exactly one of id, hash, ext");
  }
  if (const auto id = it->find("id"); id != it->end()) {
    if (!id->is_number_unsigned()) undecodable("pair_by.id must be a non-negative integer");
    return PairById{bridge, id->get<std::uint64_t>()};
  }
  if (const auto h = it->find("hash"); h != it->end()) {
    if (!h->is_string()) undecodable("pair_by.hash must be a string");
    return PairByDepositHash{to_lower(h->get<std::string>())};
  }
  if (const auto k = it->find("ext"); k != it->end()) {
    if (!k->is_string()) undecodable("pair_by.ext must be a string");
    return PairExternal{k->get<std::string>()};
  }
  undecodable("pair_by must hold exactly one of id, hash, ext");
}

}  // namespace

std::variant<ChainEvent, ParseError> parse_event_line(std::string_view line, std::size_t line_no) {
  json o;
  try {
    o = json::parse(line);
  } catch (const json::parse_error& e) {
    return ParseError{line_no, ParseError::Kind::Malformed, std::string("invalid JSON: ") + e.what(),
                      std::nullopt};
  }
  if (!o.is_object()) {
    return ParseError{line_no, ParseError::Kind::Malformed, "record must be a JSON object",
                      std::nullopt};
  }

  std::optional<UndecodableRecord> envelope;
  try {
    ChainEvent e;
    e.ref.chain = ChainId(to_lower(req_string(o, "chain", true)));
    e.block = req_uint(o, "block");
    const auto bt = o.find("block_time");
    if (bt == o.end() || !bt->is_number_integer()) malformed("block_time required");
    e.block_time = bt->get<std::int64_t>();
    e.ref.tx_hash = to_lower(req_string(o, "tx_hash", true));
    e.ref.log_index = req_uint(o, "log_index");
    e.bridge_id = req_string(o, "bridge", true);
    const std::string kind = req_string(o, "kind", true);

    EventKind k;
    if (kind == "deposit") {
      k = EventKind::Deposit;
    } else if (kind == "withdrawal") {
      k = EventKind::Withdrawal;
    } else if (kind == "transfer") {
      k = EventKind::Transfer;
    } else {
      malformed("unknown kind '" + kind + "'");
    }
    envelope = UndecodableRecord{e.ref, e.block, e.block_time, e.bridge_id, k};

    switch (k) {
      case EventKind::Deposit: {
        DepositBody d;
        d.deposit_id = opt_uint(o, "deposit_id");
        d.token = token_on(e.ref.chain, req_string(o, "token", false));
        d.claimed_amount = opt_amount(o, "amount");
        d.depositor = to_lower(req_string(o, "from", false));
        if (auto to = opt_string(o, "to")) d.recipient = to_lower(*to);
        if (auto dc = opt_string(o, "dest_chain")) d.dest_chain = ChainId(to_lower(*dc));
        d.explicit_fee = opt_amount(o, "fee");
        e.body = std::move(d);
        break;
      }
      case EventKind::Withdrawal: {
        WithdrawalBody w;
        w.pair_ref = decode_pair_by(o, e.bridge_id);
        w.token = token_on(e.ref.chain, req_string(o, "token", false));
        w.claimed_amount = opt_amount(o, "amount");
        w.recipient = to_lower(req_string(o, "recipient", false));
        if (auto sc = opt_string(o, "source_chain")) w.source_chain = ChainId(to_lower(*sc));
        e.body = std::move(w);
        break;
      }
      case EventKind::Transfer: {
        TransferBody t;
        t.token = token_on(e.ref.chain, req_string(o, "token", false));
        t.from = to_lower(req_string(o, "from", false));
        t.to = to_lower(req_string(o, "to", false));
        t.value = req_amount(o, "value");
        e.body = std::move(t);
        break;
      }
    }
    return e;
  } catch (const DecodeFailure& f) {
    ParseError err{line_no, f.kind, f.reason, std::nullopt};
    if (f.kind == ParseError::Kind::Undecodable) err.record = envelope;
    return err;
  }
}

ParseResult parse_event_log(std::istream& in, const std::optional<ChainId>& chain) {
  ParseResult out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<UnixTime> last_time;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    auto parsed = parse_event_line(line, line_no);
    if (auto* err = std::get_if<ParseError>(&parsed)) {
      out.errors.push_back(std::move(*err));
      continue;
    }
    auto& ev = std::get<ChainEvent>(parsed);
    if (chain && ev.ref.chain != *chain) {
      out.errors.push_back({line_no, ParseError::Kind::Malformed,
                            "chain mismatch: expected " + chain->name() + ", got " +
                                ev.ref.chain.name(),
                            std::nullopt});
      continue;
    }
    if (chain && last_time && ev.block_time < *last_time) {
      out.errors.push_back(
          {line_no, ParseError::Kind::Malformed, "block_time decreased", std::nullopt});
      continue;
    }
    last_time = ev.block_time;
    out.events.push_back(std::move(ev));
  }
  return out;
}

json to_json(const ChainEvent& e) {
  json o;
  o["chain"] = e.ref.chain.name();
  o["block"] = e.block;
  o["block_time"] = e.block_time;
  o["tx_hash"] = e.ref.tx_hash;
  o["log_index"] = e.ref.log_index;
  o["bridge"] = e.bridge_id;
  o["kind"] = std::string(to_string(e.kind()));
  switch (e.kind()) {
    case EventKind::Deposit: {
      const auto& d = e.deposit();
      if (d.deposit_id) o["deposit_id"] = *d.deposit_id;
      o["token"] = d.token.address;
      if (d.claimed_amount) o["amount"] = d.claimed_amount->to_string();
      o["from"] = d.depositor;
      if (d.recipient) o["to"] = *d.recipient;
      if (d.dest_chain) o["dest_chain"] = d.dest_chain->name();
      if (d.explicit_fee) o["fee"] = d.explicit_fee->to_string();
      break;
    }
    case EventKind::Withdrawal: {
      const auto& w = e.withdrawal();
      if (w.pair_ref) {
        struct V {
          json operator()(const PairById& k) const { return {{"id", k.deposit_id}}; }
          json operator()(const PairByDepositHash& k) const { return {{"hash", k.tx_hash}}; }
          json operator()(const PairExternal& k) const { return {{"ext", k.key}}; }
        };
        o["pair_by"] = std::visit(V{}, *w.pair_ref);
      }
      o["token"] = w.token.address;
      if (w.claimed_amount) o["amount"] = w.claimed_amount->to_string();
      o["recipient"] = w.recipient;
      if (w.source_chain) o["source_chain"] = w.source_chain->name();
      break;
    }
    case EventKind::Transfer: {
      const auto& t = e.transfer();
      o["token"] = t.token.address;
      o["from"] = t.from;
      o["to"] = t.to;
      o["value"] = t.value.to_string();
      break;
    }
  }
  return o;
}

std::string serialize_event(const ChainEvent& e) { return to_json(e).dump(); }

namespace {

const ChainEvent* pick_transfer(const ChainEvent& event, const TokenId& token,
                                std::span<const ChainEvent> adjacent, const BridgeConfig& bridge) {
  const bool is_deposit = event.kind() == EventKind::Deposit;
  auto passes = [&](const ChainEvent& t) {
    if (t.kind() != EventKind::Transfer || t.ref.chain != event.ref.chain ||
        t.ref.tx_hash != event.ref.tx_hash) {
      return false;
    }
    const auto& body = t.transfer();
    if (body.token != token) return false;
    // Deposits must pay into the bridge (or burn); withdrawals must be
    // paid out by the bridge (or minted).
    const std::string& counterparty = is_deposit ? body.to : body.from;
    return is_zero_address(counterparty) || bridge.is_bridge_address(event.ref.chain, counterparty);
  };

  const auto at = static_cast<std::int64_t>(event.ref.log_index);
  for (const std::int64_t off : bridge.transfer_offsets) {
    for (const auto& t : adjacent) {
      if (static_cast<std::int64_t>(t.ref.log_index) == at + off && passes(t)) return &t;
    }
  }

  const ChainEvent* best = nullptr;
  std::uint64_t best_dist = std::numeric_limits<std::uint64_t>::max();
  for (const auto& t : adjacent) {
    if (!passes(t)) continue;
    const auto li = static_cast<std::int64_t>(t.ref.log_index);
    const auto dist = static_cast<std::uint64_t>(li > at ? li - at : at - li);
    // Adjacent is in log-index order, so strict < keeps the lower index on ties.
    if (dist < best_dist) {
      best = &t;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace

Resolution resolve_amount(const ChainEvent& event, std::span<const ChainEvent> adjacent,
                          const BridgeConfig& bridge) {
  const bool is_deposit = event.kind() == EventKind::Deposit;
  if (!is_deposit && event.kind() != EventKind::Withdrawal) {
    return AmountUnresolvable{"only deposits and withdrawals carry amounts"};
  }
  const TokenId& token = is_deposit ? event.deposit().token : event.withdrawal().token;
  const std::optional<Amount>& claimed =
      is_deposit ? event.deposit().claimed_amount : event.withdrawal().claimed_amount;

  if (bridge.trusted_claims && claimed) {
    return ResolvedAmount{*claimed, AmountSource::BridgeEvent, false};
  }

  if (const ChainEvent* t = pick_transfer(event, token, adjacent, bridge)) {
    const Amount& logged = t->transfer().value;
    const AmountSource source =
        token.is_native() ? AmountSource::InternalTransaction : AmountSource::AdjacentTransfer;
    if (bridge.flags_for(token).has(TokenFlag::Reflection)) {
      if (auto scale = bridge.reflection_scale(token, event.block)) {
        return ResolvedAmount{logged.mul_div_floor(scale->first, scale->second), source, true};
      }
      // Without a scale for this block only the bridge's own figure is usable.
      if (claimed) return ResolvedAmount{*claimed, AmountSource::BridgeEvent, false};
      return AmountUnresolvable{"reflection token without scale for block " +
                                std::to_string(event.block)};
    }
    return ResolvedAmount{logged, source, false};
  }

  if (is_deposit && bridge.treat_missing_transfer_as_zero) {
    return ResolvedAmount{Amount{0}, AmountSource::BridgeEvent, false};
  }
  return AmountUnresolvable{token.is_native() ? "no internal transaction for native transfer"
                                              : "no corroborating Transfer event"};
}

TransferIndex::TransferIndex(std::span<const ChainEvent> events) {
  for (const auto& e : events) {
    if (e.kind() == EventKind::Transfer) add(e);
  }
}

void TransferIndex::add(const ChainEvent& transfer) {
  auto& v = by_tx_[{transfer.ref.chain, transfer.ref.tx_hash}];
  const auto pos = std::upper_bound(
      v.begin(), v.end(), transfer.ref.log_index,
      [](std::uint64_t li, const ChainEvent& e) { return li < e.ref.log_index; });
  v.insert(pos, transfer);
}

std::span<const ChainEvent> TransferIndex::in_tx(const TxRef& ref) const {
  const auto it = by_tx_.find({ref.chain, ref.tx_hash});
  if (it == by_tx_.end()) return {};
  return it->second;
}

}  // namespace bridgeaudit

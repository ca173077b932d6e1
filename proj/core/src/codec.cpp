#include "bridgeaudit/codec.hpp"

#include <iomanip>
#include <sstream>

namespace bridgeaudit {

using nlohmann::json;

json to_json(const TxRef& ref) {
  return {{"chain", ref.chain.name()}, {"tx_hash", ref.tx_hash}, {"log_index", ref.log_index}};
}

TxRef txref_from_json(const json& j) {
  try {
    return TxRef{ChainId(j.at("chain").get<std::string>()), j.at("tx_hash").get<std::string>(),
                 j.at("log_index").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw CodecError(std::string("bad tx reference: ") + e.what());
  }
}

namespace {

json opt_amount(const std::optional<Amount>& a) {
  return a ? json(a->to_string()) : json(nullptr);
}

Amount amount_at(const json& j, const char* key) {
  const auto& v = j.at(key);
  auto a = Amount::parse(v.get<std::string>());
  if (!a) throw CodecError(std::string(key) + " is not a decimal amount");
  return *a;
}

std::optional<Amount> opt_amount_at(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return amount_at(j, key);
}

}  // namespace

json to_json(const Finding& f) {
  json j;
  j["category"] = std::string(to_string(f.category));
  j["withdrawal"] = to_json(f.withdrawal);
  j["deposit"] = f.deposit ? to_json(*f.deposit) : json(nullptr);
  j["inflow"] = opt_amount(f.inflow);
  j["outflow"] = f.outflow.to_string();
  j["max_allowed"] = opt_amount(f.max_allowed);
  j["note"] = f.note;
  j["bridge"] = f.bridge;
  j["block_time"] = f.block_time;
  j["token"] = f.token ? json(f.token->key()) : json(nullptr);
  j["recipient"] = f.recipient;
  j["test_token"] = f.test_token;
  return j;
}

Finding finding_from_json(const json& j) {
  try {
    Finding f;
    const auto name = j.at("category").get<std::string>();
    const auto cat = parse_category(name);
    if (!cat) throw CodecError("unknown category '" + name + "'");
    f.category = *cat;
    f.withdrawal = txref_from_json(j.at("withdrawal"));
    if (j.contains("deposit") && !j.at("deposit").is_null()) {
      f.deposit = txref_from_json(j.at("deposit"));
    }
    f.inflow = opt_amount_at(j, "inflow");
    f.outflow = amount_at(j, "outflow");
    f.max_allowed = opt_amount_at(j, "max_allowed");
    f.note = j.value("note", "");
    f.bridge = j.value("bridge", "");
    f.block_time = j.value("block_time", std::int64_t{0});
    if (j.contains("token") && j.at("token").is_string()) {
      f.token = parse_token_key(j.at("token").get<std::string>());
    }
    f.recipient = j.value("recipient", "");
    f.test_token = j.value("test_token", false);
    return f;
  } catch (const json::exception& e) {
    throw CodecError(std::string("bad finding: ") + e.what());
  }
}

json to_json(const Resolution& r) {
  if (const auto* u = std::get_if<AmountUnresolvable>(&r)) {
    return {{"unresolvable", u->reason}};
  }
  const auto& a = std::get<ResolvedAmount>(r);
  return {{"amount", a.amount.to_string()},
          {"source", std::string(to_string(a.source))},
          {"scaled", a.scaled}};
}

Resolution resolution_from_json(const json& j) {
  try {
    if (j.contains("unresolvable")) {
      return AmountUnresolvable{j.at("unresolvable").get<std::string>()};
    }
    ResolvedAmount a;
    a.amount = amount_at(j, "amount");
    const auto src = j.at("source").get<std::string>();
    if (src == "bridge_event") {
      a.source = AmountSource::BridgeEvent;
    } else if (src == "adjacent_transfer") {
      a.source = AmountSource::AdjacentTransfer;
    } else if (src == "internal_transaction") {
      a.source = AmountSource::InternalTransaction;
    } else {
      throw CodecError("unknown amount source '" + src + "'");
    }
    a.scaled = j.value("scaled", false);
    return a;
  } catch (const json::exception& e) {
    throw CodecError(std::string("bad resolution: ") + e.what());
  }
}

json to_json(const AuditSummary& s) {
  auto counts = [](const std::map<Category, std::size_t>& m) {
    json c = json::object();
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
      const auto cat = static_cast<Category>(i);
      const auto it = m.find(cat);
      c[std::string(to_string(cat))] = it == m.end() ? 0 : it->second;
    }
    return c;
  };
  json j;
  j["analyzed"] = s.analyzed;
  j["violations"] = s.violations();
  j["counts"] = counts(s.counts);
  j["per_bridge"] = json::object();
  for (const auto& [bridge, m] : s.per_bridge) j["per_bridge"][bridge] = counts(m);
  j["errors"] = json::array();
  for (const auto& e : s.errors) j["errors"].push_back({{"bridge", e.bridge}, {"reason", e.reason}});
  return j;
}

std::string summary_table(const AuditSummary& s) {
  std::ostringstream os;
  auto row = [&](const std::string& name, const std::map<Category, std::size_t>& m) {
    std::size_t analyzed = 0;
    std::size_t violations = 0;
    for (const auto& [c, k] : m) {
      analyzed += k;
      if (is_violation(c)) violations += k;
    }
    os << std::left << std::setw(18) << name << std::right << std::setw(10) << analyzed
       << std::setw(11) << violations;
    for (std::size_t i = 1; i < kCategoryCount; ++i) {
      const auto it = m.find(static_cast<Category>(i));
      os << std::setw(9) << (it == m.end() ? 0 : it->second);
    }
    os << '\n';
  };
  os << std::left << std::setw(18) << "Bridge" << std::right << std::setw(10) << "Analyzed"
     << std::setw(11) << "Violations";
  // Abbreviated column heads, in category order after Balanced.
  for (const char* h : {"Undec", "Unpair", "Unbacked", "DblSpend", "DestMis", "TokMis",
                        "Exceeds", "ZeroW", "NoRecip", "Test"}) {
    os << std::setw(9) << h;
  }
  os << '\n';
  for (const auto& [bridge, m] : s.per_bridge) row(bridge, m);
  row("Total", s.counts);
  for (const auto& e : s.errors) os << "error [" << e.bridge << "]: " << e.reason << '\n';
  return os.str();
}

json to_json(const FlowSeries& s) {
  json pts = json::array();
  for (const auto& p : s.points) pts.push_back({p.t, p.value.str()});
  return {{"bridge", s.bridge}, {"token_class", s.token_class.key()}, {"points", pts}};
}

}  // namespace bridgeaudit

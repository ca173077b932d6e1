#include "bridgeaudit/config.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace bridgeaudit {

using nlohmann::json;

FeePolicy make_proportional(std::uint32_t ppm) {
  if (ppm >= 1'000'000u) throw ConfigError("proportional fee ppm must be < 1000000");
  return fee::Proportional{ppm};
}

void TokenEquivalence::link(const TokenId& a, const TokenId& b) {
  auto ensure = [this](const TokenId& t) {
    if (auto it = class_of_.find(t); it != class_of_.end()) return it->second;
    classes_.push_back({t});
    class_of_.emplace(t, classes_.size() - 1);
    return classes_.size() - 1;
  };
  const std::size_t ca = ensure(a);
  const std::size_t cb = ensure(b);
  if (ca == cb) return;
  // Fold the smaller class into the larger one; the emptied slot stays.
  const auto [into, from] = classes_[ca].size() >= classes_[cb].size() ? std::pair{ca, cb}
                                                                         : std::pair{cb, ca};
  for (const auto& t : classes_[from]) class_of_[t] = into;
  classes_[into].merge(classes_[from]);
  classes_[from].clear();
}

bool TokenEquivalence::equivalent(const TokenId& a, const TokenId& b) const {
  if (a == b) return true;
  const auto ia = class_of_.find(a);
  const auto ib = class_of_.find(b);
  return ia != class_of_.end() && ib != class_of_.end() && ia->second == ib->second;
}

TokenId TokenEquivalence::representative(const TokenId& t) const {
  const auto it = class_of_.find(t);
  if (it == class_of_.end()) return t;
  TokenId rep = *classes_[it->second].begin();
  rep.symbol.reset();
  rep.flags = {};
  return rep;
}

std::vector<std::vector<TokenId>> TokenEquivalence::classes() const {
  std::vector<std::vector<TokenId>> out;
  for (const auto& c : classes_) {
    if (c.size() > 1) out.emplace_back(c.begin(), c.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool BridgeConfig::allows(PairingStrategy s) const {
  return std::find(pairing.begin(), pairing.end(), s) != pairing.end();
}

bool BridgeConfig::is_bridge_address(const ChainId& chain, std::string_view address) const {
  const auto it = addresses.find(chain);
  return it != addresses.end() && it->second.count(to_lower(address)) > 0;
}

const FeePolicy& BridgeConfig::fee_for(const TokenId& token) const {
  const auto it = fees.find(token);
  return it == fees.end() ? default_fee : it->second;
}

TokenFlags BridgeConfig::flags_for(const TokenId& token) const {
  TokenFlags f = token.flags;
  if (test_tokens.count(token)) f.set(TokenFlag::TestToken);
  for (const auto& r : reflection) {
    if (r.token == token) {
      f.set(TokenFlag::Reflection);
      break;
    }
  }
  return f;
}

std::optional<std::pair<Amount, Amount>> BridgeConfig::reflection_scale(const TokenId& token,
                                                                        std::uint64_t block) const {
  for (const auto& r : reflection) {
    if (r.token == token && block >= r.from_block && block <= r.to_block) {
      return std::pair{r.numerator, r.denominator};
    }
  }
  return std::nullopt;
}

bool BridgeConfig::is_known_token(const TokenId& token) const {
  return known_tokens.empty() || known_tokens.count(token) > 0;
}

const BridgeConfig& AuditConfig::bridge(std::string_view id) const {
  static const BridgeConfig kDefault{};
  const auto it = bridges.find(id);
  return it == bridges.end() ? kDefault : it->second;
}

std::optional<ChainInfo> AuditConfig::chain(const ChainId& id) const {
  for (const auto& c : chains) {
    if (c.id == id) return c;
  }
  return std::nullopt;
}

namespace {

TokenId token_from(const json& j, std::string_view what) {
  if (!j.is_string()) throw ConfigError(std::string(what) + ": token must be \"chain:address\"");
  auto t = parse_token_key(j.get<std::string>());
  if (!t) throw ConfigError(std::string(what) + ": bad token key '" + j.get<std::string>() + "'");
  return *t;
}

Amount amount_from(const json& j, std::string_view what) {
  std::optional<Amount> a;
  if (j.is_string()) {
    a = Amount::parse(j.get<std::string>());
  } else if (j.is_number_unsigned()) {
    a = Amount(j.get<std::uint64_t>());
  }
  if (!a) throw ConfigError(std::string(what) + ": expected a non-negative decimal amount");
  return *a;
}

}  // namespace

FeePolicy fee_from(const json& j) {
  const std::string p = j.is_string() ? j.get<std::string>() : j.value("policy", "");
  if (p == "explicit") return fee::Explicit{};
  if (p == "indeterminate" || p == "fiat") return fee::Indeterminate{};
  if (p == "fixed") return fee::Fixed{amount_from(j.at("amount"), "fixed fee")};
  if (p == "proportional") {
    const auto& ppm = j.at("ppm");
    if (!ppm.is_number_integer() || ppm.get<std::int64_t>() < 0) {
      throw ConfigError("proportional fee ppm must be a non-negative integer");
    }
    const auto v = ppm.get<std::int64_t>();
    if (v >= 1'000'000) throw ConfigError("proportional fee ppm must be < 1000000");
    return fee::Proportional{static_cast<std::uint32_t>(v)};
  }
  throw ConfigError("unknown fee policy '" + p + "'");
}

json fee_to_json(const FeePolicy& p) {
  struct V {
    json operator()(const fee::Explicit&) const { return {{"policy", "explicit"}}; }
    json operator()(const fee::Indeterminate&) const { return {{"policy", "indeterminate"}}; }
    json operator()(const fee::Fixed& f) const {
      return {{"policy", "fixed"}, {"amount", f.amount.to_string()}};
    }
    json operator()(const fee::Proportional& f) const {
      return {{"policy", "proportional"}, {"ppm", f.ppm}};
    }
  };
  return std::visit(V{}, p);
}

PairingStrategy strategy_from(const std::string& s) {
  if (s == "id") return PairingStrategy::ById;
  if (s == "hash") return PairingStrategy::ByDepositHash;
  if (s == "external") return PairingStrategy::External;
  throw ConfigError("unknown pairing strategy '" + s + "'");
}

std::string_view strategy_name(PairingStrategy s) {
  switch (s) {
    case PairingStrategy::ById: return "id";
    case PairingStrategy::ByDepositHash: return "hash";
    case PairingStrategy::External: return "external";
  }
  return "?";
}

namespace {

BridgeConfig bridge_from(const json& j) {
  BridgeConfig b;
  b.id = j.at("id").get<std::string>();
  if (b.id.empty()) throw ConfigError("bridge id must be non-empty");
  if (j.contains("pairing")) {
    b.pairing.clear();
    for (const auto& s : j.at("pairing")) b.pairing.push_back(strategy_from(s.get<std::string>()));
  }
  b.trusted_claims = j.value("trusted_claims", false);
  b.treat_missing_transfer_as_zero = j.value("treat_missing_transfer_as_zero", false);
  if (j.contains("addresses")) {
    for (const auto& [chain, list] : j.at("addresses").items()) {
      auto& set = b.addresses[ChainId(chain)];
      for (const auto& a : list) set.insert(to_lower(a.get<std::string>()));
    }
  }
  if (j.contains("default_fee")) b.default_fee = fee_from(j.at("default_fee"));
  if (j.contains("fees")) {
    for (const auto& f : j.at("fees")) b.fees[token_from(f.at("token"), "fees")] = fee_from(f);
  }
  if (j.contains("equivalences")) {
    for (const auto& pair : j.at("equivalences")) {
      if (!pair.is_array() || pair.size() < 2) throw ConfigError("equivalence needs two tokens");
      const TokenId first = token_from(pair[0], "equivalences");
      for (std::size_t i = 1; i < pair.size(); ++i) {
        b.equivalence.link(first, token_from(pair[i], "equivalences"));
      }
    }
  }
  if (j.contains("reflection")) {
    for (const auto& r : j.at("reflection")) {
      ReflectionScale s;
      s.token = token_from(r.at("token"), "reflection");
      s.from_block = r.value("from_block", std::uint64_t{0});
      s.to_block = r.value("to_block", UINT64_MAX);
      s.numerator = amount_from(r.at("numerator"), "reflection numerator");
      s.denominator = amount_from(r.at("denominator"), "reflection denominator");
      if (s.denominator.is_zero()) throw ConfigError("reflection denominator must be non-zero");
      b.reflection.push_back(std::move(s));
    }
  }
  for (const char* key : {"test_tokens", "known_tokens"}) {
    if (!j.contains(key)) continue;
    auto& set = std::string_view(key) == "test_tokens" ? b.test_tokens : b.known_tokens;
    for (const auto& t : j.at(key)) set.insert(token_from(t, key));
  }
  if (j.contains("transfer_offsets")) {
    b.transfer_offsets = j.at("transfer_offsets").get<std::vector<std::int64_t>>();
  }
  return b;
}

}  // namespace

AuditConfig parse_audit_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  AuditConfig cfg;
  try {
    if (j.contains("chains")) {
      for (const auto& c : j.at("chains")) {
        ChainInfo info{ChainId(c.at("name").get<std::string>()), c.value("finality_lag", 0)};
        if (info.id.empty()) throw ConfigError("chain name must be non-empty");
        if (info.finality_lag < 0) throw ConfigError("finality_lag must be >= 0");
        if (cfg.chain(info.id)) throw ConfigError("duplicate chain '" + info.id.name() + "'");
        cfg.chains.push_back(std::move(info));
      }
    }
    if (j.contains("bridges")) {
      for (const auto& bj : j.at("bridges")) {
        BridgeConfig b = bridge_from(bj);
        const std::string id = b.id;
        if (!cfg.bridges.emplace(id, std::move(b)).second) {
          throw ConfigError("duplicate bridge '" + id + "'");
        }
      }
    }
    cfg.strict_fees = j.value("strict_fees", false);
    cfg.alert_on_unknown_token = j.value("alert_on_unknown_token", true);
    if (j.contains("external_maps")) {
      for (const auto& p : j.at("external_maps")) cfg.external_maps.emplace_back(p.get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

AuditConfig load_audit_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  AuditConfig cfg = parse_audit_config(j);
  for (auto& p : cfg.external_maps) {
    if (p.is_relative()) p = path.parent_path() / p;
  }
  return cfg;
}

json to_json(const AuditConfig& cfg) {
  json j;
  j["chains"] = json::array();
  for (const auto& c : cfg.chains) {
    j["chains"].push_back({{"name", c.id.name()}, {"finality_lag", c.finality_lag}});
  }
  j["strict_fees"] = cfg.strict_fees;
  j["alert_on_unknown_token"] = cfg.alert_on_unknown_token;
  j["bridges"] = json::array();
  for (const auto& [id, b] : cfg.bridges) {
    json bj;
    bj["id"] = id;
    bj["pairing"] = json::array();
    for (auto s : b.pairing) bj["pairing"].push_back(strategy_name(s));
    bj["trusted_claims"] = b.trusted_claims;
    bj["treat_missing_transfer_as_zero"] = b.treat_missing_transfer_as_zero;
    bj["addresses"] = json::object();
    for (const auto& [chain, set] : b.addresses) bj["addresses"][chain.name()] = set;
    bj["default_fee"] = fee_to_json(b.default_fee);
    bj["fees"] = json::array();
    for (const auto& [tok, p] : b.fees) {
      json f = fee_to_json(p);
      f["token"] = tok.key();
      bj["fees"].push_back(std::move(f));
    }
    bj["equivalences"] = json::array();
    for (const auto& cls : b.equivalence.classes()) {
      json members = json::array();
      for (const auto& t : cls) members.push_back(t.key());
      bj["equivalences"].push_back(std::move(members));
    }
    bj["reflection"] = json::array();
    for (const auto& r : b.reflection) {
      bj["reflection"].push_back({{"token", r.token.key()},
                                  {"from_block", r.from_block},
                                  {"to_block", r.to_block},
                                  {"numerator", r.numerator.to_string()},
                                  {"denominator", r.denominator.to_string()}});
    }
    bj["test_tokens"] = json::array();
    for (const auto& t : b.test_tokens) bj["test_tokens"].push_back(t.key());
    bj["known_tokens"] = json::array();
    for (const auto& t : b.known_tokens) bj["known_tokens"].push_back(t.key());
    bj["transfer_offsets"] = b.transfer_offsets;
    j["bridges"].push_back(std::move(bj));
  }
  j["external_maps"] = json::array();
  for (const auto& p : cfg.external_maps) j["external_maps"].push_back(p.string());
  return j;
}

std::string to_string(const FeePolicy& policy) { return fee_to_json(policy).dump(); }

}  // namespace bridgeaudit

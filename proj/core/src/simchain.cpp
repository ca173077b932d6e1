#include "bridgeaudit/simchain.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "bridgeaudit/codec.hpp"
#include "bridgeaudit/digest.hpp"
#include "bridgeaudit/rng.hpp"

namespace bridgeaudit::sim {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kAttackKindCount> kKindNames{
    "FakeDeposit", "UnbackedWithdrawal", "Replay", "AmountMismatch", "WrongDestination"};

// Reflection tokens report balances scaled by 98/100 in every block.
constexpr std::uint64_t kReflectNum = 98;
constexpr std::uint64_t kReflectDen = 100;

}  // namespace

std::string_view to_string(AttackKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<AttackKind> parse_attack_kind(std::string_view s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == s) return static_cast<AttackKind>(i);
  }
  return std::nullopt;
}

Category expected_category(AttackKind k) {
  switch (k) {
    case AttackKind::FakeDeposit: return Category::AmountExceedsInflow;
    case AttackKind::UnbackedWithdrawal: return Category::UnbackedWithdrawal;
    case AttackKind::Replay: return Category::DoubleSpend;
    case AttackKind::AmountMismatch: return Category::AmountExceedsInflow;
    case AttackKind::WrongDestination: return Category::DestinationMismatch;
  }
  return Category::Balanced;
}

// ---- scenario ----

std::uint64_t ScenarioConfig::benign_flows() const {
  if (benign_count) return *benign_count;
  return traffic_per_hour * static_cast<std::uint64_t>(duration) / 3600;
}

void validate(const ScenarioConfig& c) {
  if (c.chains.size() < 2) throw ConfigError("scenario needs at least two chains");
  if (c.bridges.empty()) throw ConfigError("scenario needs at least one bridge");
  if (c.duration <= 0) throw ConfigError("duration must be positive");
  if (c.max_delay < 0) throw ConfigError("max_delay must be non-negative");
  if (c.pending_ppm >= 1'000'000 || c.zero_withdrawal_ppm >= 1'000'000) {
    throw ConfigError("rates are parts per million and must be < 1000000");
  }
  std::set<std::string> names;
  for (const auto& ch : c.chains) {
    if (ch.name.empty() || !names.insert(ch.name).second) {
      throw ConfigError("chain names must be unique and non-empty");
    }
    if (ch.finality_lag < 0 || ch.block_seconds <= 0) {
      throw ConfigError("chain " + ch.name + ": bad finality_lag or block_seconds");
    }
  }
  std::set<std::string> ids;
  for (const auto& b : c.bridges) {
    if (b.id.empty() || !ids.insert(b.id).second) {
      throw ConfigError("bridge ids must be unique and non-empty");
    }
    if (!b.chains.empty() && b.chains.size() < 2) {
      throw ConfigError("bridge " + b.id + " must span at least two chains");
    }
    for (const auto& ch : b.chains) {
      if (!names.count(ch)) throw ConfigError("bridge " + b.id + ": unknown chain " + ch);
    }
    if (b.tokens.empty()) throw ConfigError("bridge " + b.id + " has no tokens");
    if (b.pairing == PairingStrategy::External) {
      throw ConfigError("bridge " + b.id + ": generated traffic pairs by id or hash only");
    }
    if (std::none_of(b.tokens.begin(), b.tokens.end(),
                     [](const TokenSpec& t) { return !t.reflection; }) &&
        std::any_of(c.injections.begin(), c.injections.end(),
                    [](const Injection& i) { return i.count > 0; })) {
      throw ConfigError("bridge " + b.id + ": attacks need a non-reflection token");
    }
  }
  for (const auto& inj : c.injections) {
    const auto to = inj.to.value_or(c.duration);
    if (inj.from < 0 || to <= inj.from || to > c.duration) {
      throw ConfigError("injection " + std::string(to_string(inj.kind)) + ": bad time range");
    }
  }
}

ScenarioConfig parse_scenario(const json& j) {
  try {
    ScenarioConfig c;
    c.seed = j.value("seed", std::uint64_t{1});
    c.start_time = j.value("start_time", c.start_time);
    c.duration = j.value("duration", c.duration);
    c.traffic_per_hour = j.value("traffic_per_hour", c.traffic_per_hour);
    if (j.contains("benign_count")) c.benign_count = j.at("benign_count").get<std::uint64_t>();
    c.max_delay = j.value("max_delay", c.max_delay);
    c.pending_ppm = j.value("pending_ppm", c.pending_ppm);
    c.zero_withdrawal_ppm = j.value("zero_withdrawal_ppm", c.zero_withdrawal_ppm);
    for (const auto& ch : j.at("chains")) {
      ChainSpec s;
      s.name = ch.at("name").get<std::string>();
      s.finality_lag = ch.value("finality_lag", s.finality_lag);
      s.block_seconds = ch.value("block_seconds", s.block_seconds);
      c.chains.push_back(std::move(s));
    }
    for (const auto& bj : j.at("bridges")) {
      BridgeSpec b;
      b.id = bj.at("id").get<std::string>();
      if (bj.contains("chains")) b.chains = bj.at("chains").get<std::vector<std::string>>();
      if (bj.contains("fee")) b.fee = fee_from(bj.at("fee"));
      if (bj.contains("pairing")) b.pairing = strategy_from(bj.at("pairing").get<std::string>());
      if (bj.contains("tokens")) {
        b.tokens.clear();
        for (const auto& t : bj.at("tokens")) {
          if (t.is_string()) {
            b.tokens.push_back({t.get<std::string>(), false});
          } else {
            b.tokens.push_back({t.at("symbol").get<std::string>(), t.value("reflection", false)});
          }
        }
      }
      c.bridges.push_back(std::move(b));
    }
    if (j.contains("injections")) {
      for (const auto& ij : j.at("injections")) {
        Injection inj;
        const auto name = ij.at("kind").get<std::string>();
        const auto kind = parse_attack_kind(name);
        if (!kind) throw ConfigError("unknown attack kind '" + name + "'");
        inj.kind = *kind;
        inj.count = ij.value("count", std::size_t{1});
        inj.from = ij.value("from", std::int64_t{0});
        if (ij.contains("to")) inj.to = ij.at("to").get<std::int64_t>();
        c.injections.push_back(inj);
      }
    }
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scenario: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["start_time"] = c.start_time;
  j["duration"] = c.duration;
  j["traffic_per_hour"] = c.traffic_per_hour;
  if (c.benign_count) j["benign_count"] = *c.benign_count;
  j["max_delay"] = c.max_delay;
  j["pending_ppm"] = c.pending_ppm;
  j["zero_withdrawal_ppm"] = c.zero_withdrawal_ppm;
  j["chains"] = json::array();
  for (const auto& ch : c.chains) {
    j["chains"].push_back(
        {{"name", ch.name}, {"finality_lag", ch.finality_lag}, {"block_seconds", ch.block_seconds}});
  }
  j["bridges"] = json::array();
  for (const auto& b : c.bridges) {
    json tokens = json::array();
    for (const auto& t : b.tokens) tokens.push_back({{"symbol", t.symbol}, {"reflection", t.reflection}});
    j["bridges"].push_back({{"id", b.id},
                            {"chains", b.chains},
                            {"fee", fee_to_json(b.fee)},
                            {"pairing", strategy_name(b.pairing)},
                            {"tokens", tokens}});
  }
  j["injections"] = json::array();
  for (const auto& i : c.injections) {
    json ij = {{"kind", to_string(i.kind)}, {"count", i.count}, {"from", i.from}};
    if (i.to) ij["to"] = *i.to;
    j["injections"].push_back(std::move(ij));
  }
  return j;
}

// ---- ground truth ----

json to_json(const GroundTruthEntry& e) {
  return {{"withdrawal_tx", e.withdrawal.tx_hash},
          {"chain", e.withdrawal.chain.name()},
          {"log_index", e.withdrawal.log_index},
          {"category", to_string(e.category)},
          {"kind", to_string(e.kind)}};
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  GroundTruth out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    GroundTruthEntry e;
    e.withdrawal = TxRef{ChainId(j.at("chain").get<std::string>()),
                         j.at("withdrawal_tx").get<std::string>(), j.value("log_index", 0ULL)};
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw std::runtime_error("unknown category in " + path.string());
    e.category = *cat;
    if (const auto k = parse_attack_kind(j.value("kind", ""))) e.kind = *k;
    out.push_back(std::move(e));
  }
  return out;
}

// ---- generation ----

namespace {

struct TokenSlot {
  TokenSpec spec;
  std::map<std::string, TokenId> on_chain;
};

struct BridgeState {
  const BridgeSpec* spec = nullptr;
  std::vector<std::string> chains;
  std::map<std::string, std::string> address;  // chain -> bridge address
  std::vector<TokenSlot> tokens;
  std::uint64_t next_deposit_id = 1;
};

struct DepositMade {
  TxRef ref;
  std::uint64_t deposit_id = 0;
  UnixTime time = 0;
  std::string source;
  std::string dest;
  std::size_t token = 0;
  Amount inflow;  // what the auditor will resolve
  std::optional<Amount> explicit_fee;
  Amount raw;     // transfer value as logged
  std::string recipient;
};

class Generator {
 public:
  explicit Generator(const ScenarioConfig& c) : cfg_(c), rng_(c.seed) {
    for (const auto& ch : c.chains) chains_[ch.name] = ch;
    for (const auto& b : c.bridges) bridges_.push_back(make_bridge(b));
    build_config();
  }

  GeneratedTrace run() {
    const std::uint64_t flows = cfg_.benign_flows();
    for (std::uint64_t i = 0; i < flows; ++i) benign_flow();
    for (const auto& inj : cfg_.injections) {
      for (std::size_t k = 0; k < inj.count; ++k) attack(inj);
    }
    for (auto& [_, events] : out_.per_chain) {
      std::sort(events.begin(), events.end(), [](const ChainEvent& a, const ChainEvent& b) {
        return std::tie(a.block_time, a.block, a.ref.log_index) <
               std::tie(b.block_time, b.block, b.ref.log_index);
      });
    }
    for (const auto& ch : cfg_.chains) out_.per_chain[ch.name];  // empty chains still get a file
    return std::move(out_);
  }

 private:
  std::string digest(std::string_view label) {
    return sha256_hex(std::to_string(cfg_.seed) + ":" + std::to_string(counter_++) + ":" +
                      std::string(label));
  }
  std::string address(std::string_view label) { return "0x" + digest(label).substr(0, 40); }

  BridgeState make_bridge(const BridgeSpec& b) {
    BridgeState s;
    s.spec = &b;
    if (b.chains.empty()) {
      for (const auto& ch : cfg_.chains) s.chains.push_back(ch.name);
    } else {
      s.chains = b.chains;
    }
    for (const auto& ch : s.chains) {
      s.address[ch] = "0x" + sha256_hex("bridge:" + b.id + ":" + ch).substr(0, 40);
    }
    for (const auto& t : b.tokens) {
      TokenSlot slot{t, {}};
      for (const auto& ch : s.chains) {
        TokenFlags flags;
        if (t.reflection) flags.set(TokenFlag::Reflection);
        slot.on_chain[ch] = TokenId{ChainId(ch),
                                    "0x" + sha256_hex("token:" + b.id + ":" + t.symbol + ":" + ch)
                                               .substr(0, 40),
                                    t.symbol, flags};
      }
      s.tokens.push_back(std::move(slot));
    }
    return s;
  }

  void build_config() {
    AuditConfig& c = out_.config;
    for (const auto& ch : cfg_.chains) c.chains.push_back(ChainInfo{ChainId(ch.name), ch.finality_lag});
    for (const auto& s : bridges_) {
      BridgeConfig b;
      b.id = s.spec->id;
      b.pairing = {s.spec->pairing};
      b.treat_missing_transfer_as_zero = true;
      b.transfer_offsets = {-1};
      b.default_fee = s.spec->fee;
      for (const auto& [ch, addr] : s.address) b.addresses[ChainId(ch)].insert(addr);
      for (const auto& slot : s.tokens) {
        const TokenId* first = nullptr;
        for (const auto& [_, tok] : slot.on_chain) {
          b.known_tokens.insert(tok);
          if (first) b.equivalence.link(*first, tok);
          first = first ? first : &tok;
          if (slot.spec.reflection) {
            b.fees[tok] = fee::Indeterminate{};
            b.reflection.push_back(ReflectionScale{tok, 0, UINT64_MAX, Amount(kReflectNum),
                                                   Amount(kReflectDen)});
          }
        }
      }
      c.bridges.emplace(b.id, std::move(b));
    }
  }

  // Places `bodies` as consecutive logs of one new transaction. Returns
  // the ref of the last log (the bridge event).
  TxRef emit(const std::string& chain, UnixTime t, bool round_up, const std::string& bridge,
             std::vector<decltype(ChainEvent::body)> bodies) {
    const ChainSpec& ch = chains_.at(chain);
    const std::int64_t offset = t - cfg_.start_time;
    std::int64_t slot = offset / ch.block_seconds;
    if (round_up && offset % ch.block_seconds != 0) ++slot;
    const std::uint64_t block = 1'000'000 + static_cast<std::uint64_t>(slot);
    const UnixTime time = cfg_.start_time + slot * ch.block_seconds;
    const std::string hash = "0x" + digest("tx");
    auto& next_log = log_index_[{chain, block}];
    TxRef last;
    for (auto& body : bodies) {
      ChainEvent e;
      e.ref = TxRef{ChainId(chain), hash, next_log++};
      e.block = block;
      e.block_time = time;
      e.bridge_id = bridge;
      e.body = std::move(body);
      last = e.ref;
      out_.per_chain[chain].push_back(std::move(e));
    }
    last_time_ = time;
    return last;
  }

  Amount random_amount(const BridgeState& b, const TokenSlot& slot) {
    Amount a(uniform_between(rng_, 1'000'000, 1'000'000'000'000'000ULL));
    if (const auto* f = std::get_if<fee::Fixed>(&b.spec->fee); f && !slot.spec.reflection) {
      a += f->amount;  // always clears the fixed fee
    }
    return a;
  }

  std::size_t pick_token(const BridgeState& b, bool plain_only) {
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < b.tokens.size(); ++i) {
      if (!plain_only || !b.tokens[i].spec.reflection) ok.push_back(i);
    }
    return ok[uniform_below(rng_, ok.size())];
  }

  DepositMade deposit(BridgeState& b, UnixTime t, bool plain_only, bool with_transfer) {
    DepositMade d;
    const std::size_t si = uniform_below(rng_, b.chains.size());
    std::size_t di = uniform_below(rng_, b.chains.size() - 1);
    if (di >= si) ++di;
    d.source = b.chains[si];
    d.dest = b.chains[di];
    d.token = pick_token(b, plain_only);
    const TokenSlot& slot = b.tokens[d.token];
    const TokenId& tok = slot.on_chain.at(d.source);
    d.raw = random_amount(b, slot);
    d.inflow = slot.spec.reflection ? d.raw.mul_div_floor(Amount(kReflectNum), Amount(kReflectDen))
                                    : d.raw;
    if (std::holds_alternative<fee::Explicit>(b.spec->fee) && !slot.spec.reflection) {
      d.explicit_fee = d.raw.mul_div_floor(Amount(uniform_below(rng_, 5'000)), Amount(1'000'000));
    }
    d.deposit_id = b.next_deposit_id++;
    const std::string user = address("user");
    d.recipient = address("recipient");

    std::vector<decltype(ChainEvent::body)> bodies;
    if (with_transfer) bodies.push_back(TransferBody{tok, user, b.address.at(d.source), d.raw});
    bodies.push_back(DepositBody{d.deposit_id, tok, d.raw, user, d.recipient, ChainId(d.dest),
                                 d.explicit_fee});
    d.ref = emit(d.source, t, false, b.spec->id, std::move(bodies));
    d.time = last_time_;
    return d;
  }

  Amount max_outflow(const BridgeState& b, const DepositMade& d) const {
    const TokenId& tok = b.tokens[d.token].on_chain.at(d.source);
    return compute_max_outflow(d.inflow, out_.config.bridge(b.spec->id).fee_for(tok),
                               d.explicit_fee);
  }

  UnixTime withdrawal_time(const DepositMade& d) {
    return d.time + chains_.at(d.source).finality_lag + 1 +
           static_cast<std::int64_t>(uniform_below(rng_, static_cast<std::uint64_t>(cfg_.max_delay) + 1));
  }

  PairKey pair_key(const BridgeState& b, const DepositMade& d) const {
    if (b.spec->pairing == PairingStrategy::ByDepositHash) return PairByDepositHash{d.ref.tx_hash};
    return PairById{b.spec->id, d.deposit_id};
  }

  // `raw_out` is the logged mint; for reflection tokens the auditor sees
  // it scaled, same as the deposit.
  TxRef withdraw(BridgeState& b, const std::string& chain, std::size_t token, UnixTime t,
                 std::optional<PairKey> key, const Amount& raw_out, const std::string& recipient,
                 const std::string& source) {
    const TokenId& tok = b.tokens[token].on_chain.at(chain);
    std::vector<decltype(ChainEvent::body)> bodies;
    bodies.push_back(TransferBody{tok, "0x0000000000000000000000000000000000000000", recipient, raw_out});
    bodies.push_back(WithdrawalBody{std::move(key), tok, raw_out, recipient, ChainId(source)});
    return emit(chain, t, true, b.spec->id, std::move(bodies));
  }

  UnixTime random_time(std::int64_t from, std::int64_t to) {
    return cfg_.start_time + from +
           static_cast<std::int64_t>(uniform_below(rng_, static_cast<std::uint64_t>(to - from)));
  }

  BridgeState& random_bridge() { return bridges_[uniform_below(rng_, bridges_.size())]; }

  void benign_flow() {
    BridgeState& b = random_bridge();
    DepositMade d = deposit(b, random_time(0, cfg_.duration), false, true);
    if (chance(rng_, cfg_.pending_ppm, 1'000'000)) {
      ++out_.pending_deposits;
      return;
    }
    Amount out = b.tokens[d.token].spec.reflection ? d.raw : max_outflow(b, d);
    if (chance(rng_, cfg_.zero_withdrawal_ppm, 1'000'000)) {
      out = Amount{};
      ++out_.zero_withdrawals;
    }
    withdraw(b, d.dest, d.token, withdrawal_time(d), pair_key(b, d), out, d.recipient, d.source);
    ++out_.benign_withdrawals;
  }

  void attack(const Injection& inj) {
    BridgeState& b = random_bridge();
    const UnixTime t = random_time(inj.from, inj.to.value_or(cfg_.duration));
    TxRef w;
    switch (inj.kind) {
      case AttackKind::FakeDeposit: {
        // Deposit event claims tokens that never arrived.
        DepositMade d = deposit(b, t, true, false);
        w = withdraw(b, d.dest, d.token, withdrawal_time(d), pair_key(b, d),
                     compute_max_outflow(d.raw, out_.config.bridge(b.spec->id).fee_for(
                                                    b.tokens[d.token].on_chain.at(d.source)),
                                         d.explicit_fee),
                     d.recipient, d.source);
        break;
      }
      case AttackKind::UnbackedWithdrawal: {
        const std::size_t si = uniform_below(rng_, b.chains.size());
        std::size_t di = uniform_below(rng_, b.chains.size() - 1);
        if (di >= si) ++di;
        const std::size_t token = pick_token(b, true);
        PairKey key = b.spec->pairing == PairingStrategy::ByDepositHash
                          ? PairKey{PairByDepositHash{"0x" + digest("forged")}}
                          : PairKey{PairById{b.spec->id, 1'000'000'000 + b.next_deposit_id++}};
        w = withdraw(b, b.chains[di], token, t, std::move(key), random_amount(b, b.tokens[token]),
                     address("attacker"), b.chains[si]);
        break;
      }
      case AttackKind::Replay: {
        DepositMade d = deposit(b, t, true, true);
        const UnixTime first = withdrawal_time(d);
        withdraw(b, d.dest, d.token, first, pair_key(b, d), max_outflow(b, d),
                                      d.recipient, d.source);
        ++out_.benign_withdrawals;
        const UnixTime again = last_time_ + 1 +
                               static_cast<std::int64_t>(uniform_below(rng_, 600));
        w = withdraw(b, d.dest, d.token, again, pair_key(b, d), max_outflow(b, d),
                     address("attacker"), d.source);
        break;
      }
      case AttackKind::AmountMismatch: {
        DepositMade d = deposit(b, t, true, true);
        w = withdraw(b, d.dest, d.token, withdrawal_time(d), pair_key(b, d),
                     max_outflow(b, d) + Amount(uniform_between(rng_, 1, 1'000'000'000)),
                     d.recipient, d.source);
        break;
      }
      case AttackKind::WrongDestination: {
        DepositMade d = deposit(b, t, true, true);
        std::vector<std::string> others;
        for (const auto& ch : b.chains) {
          if (ch != d.dest) others.push_back(ch);
        }
        const std::string& chain = others[uniform_below(rng_, others.size())];
        // Must still come after the deposit in event order.
        w = withdraw(b, chain, d.token, withdrawal_time(d), pair_key(b, d), max_outflow(b, d),
                     d.recipient, d.source);
        break;
      }
    }
    out_.truth.push_back(GroundTruthEntry{w, expected_category(inj.kind), inj.kind});
  }

  const ScenarioConfig& cfg_;
  std::mt19937_64 rng_;
  std::uint64_t counter_ = 0;
  UnixTime last_time_ = 0;  // block time of the last emitted transaction
  std::map<std::string, ChainSpec> chains_;
  std::vector<BridgeState> bridges_;
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> log_index_;
  GeneratedTrace out_;
};

}  // namespace

std::vector<ChainEvent> GeneratedTrace::all_events() const {
  std::vector<ChainEvent> all;
  for (const auto& [_, events] : per_chain) all.insert(all.end(), events.begin(), events.end());
  std::sort(all.begin(), all.end(), event_order_less);
  return all;
}

GeneratedTrace generate(const ScenarioConfig& config) {
  validate(config);
  return Generator(config).run();
}

void write_trace(const GeneratedTrace& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  for (const auto& [chain, events] : trace.per_chain) {
    auto out = open(chain + ".jsonl");
    for (const auto& e : events) out << serialize_event(e) << '\n';
  }
  {
    auto out = open("ground_truth.jsonl");
    for (const auto& e : trace.truth) out << to_json(e).dump() << '\n';
  }
  auto out = open("config.json");
  out << to_json(trace.config).dump(2) << '\n';
}

// ---- scoring ----

double ScoreReport::precision() const {
  const auto flagged = true_positives + false_positives;
  return flagged == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(flagged);
}

double ScoreReport::recall() const {
  const auto expected = true_positives + false_negatives;
  return expected == 0 ? 1.0 : static_cast<double>(true_positives) / static_cast<double>(expected);
}

json to_json(const ScoreReport& s) {
  json confusion = json::array();
  for (const auto& [k, n] : s.confusion) {
    confusion.push_back({{"expected", k.first}, {"actual", k.second}, {"count", n}});
  }
  return {{"true_positives", s.true_positives},
          {"false_positives", s.false_positives},
          {"false_negatives", s.false_negatives},
          {"precision", s.precision()},
          {"recall", s.recall()},
          {"confusion", confusion}};
}

ScoreReport score(std::span<const Finding> findings, const GroundTruth& truth,
                  const std::set<Category>& benign) {
  std::map<TxRef, Category> expected;
  for (const auto& t : truth) expected[t.withdrawal] = t.category;
  std::map<TxRef, Category> actual;
  for (const auto& f : findings) actual[f.withdrawal] = f.category;

  ScoreReport r;
  for (const auto& [ref, cat] : expected) {
    const auto it = actual.find(ref);
    const std::string got = it == actual.end() ? "none" : std::string(to_string(it->second));
    ++r.confusion[{std::string(to_string(cat)), got}];
    if (it != actual.end() && it->second == cat) {
      ++r.true_positives;
    } else {
      ++r.false_negatives;
    }
  }
  for (const auto& [ref, cat] : actual) {
    if (!is_violation(cat) || expected.count(ref) || benign.count(cat)) continue;
    ++r.false_positives;
    ++r.confusion[{"none", std::string(to_string(cat))}];
  }
  return r;
}

}  // namespace bridgeaudit::sim

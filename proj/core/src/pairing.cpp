#include "bridgeaudit/pairing.hpp"

#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

namespace bridgeaudit {

DuplicateDepositKey::DuplicateDepositKey(PairKey key, TxRef first, TxRef second)
    : std::runtime_error("duplicate deposit key " + to_string(key) + ": " + first.to_string() +
                         " and " + second.to_string()),
      key_(std::move(key)),
      first_(std::move(first)),
      second_(std::move(second)) {}

ExternalMap parse_external_map(std::istream& in) {
  ExternalMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      ExternalTarget target{ChainId(to_lower(j.at("chain").get<std::string>())),
                            to_lower(j.at("deposit_tx").get<std::string>())};
      std::string key = j.at("key").get<std::string>();
      auto [it, inserted] = out.emplace(key, target);
      if (!inserted && !(it->second == target)) {
        throw DuplicateDepositKey(PairExternal{key}, TxRef{it->second.chain, it->second.deposit_tx, 0},
                                  TxRef{target.chain, target.deposit_tx, 0});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("external map line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ExternalMap load_external_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open external map " + path.string());
  return parse_external_map(in);
}

DepositIndex::DepositIndex(std::string bridge_id, ExternalMap external)
    : bridge_id_(std::move(bridge_id)), external_(std::move(external)) {}

void DepositIndex::add(const ChainEvent& deposit) {
  if (deposit.kind() != EventKind::Deposit) throw std::invalid_argument("DepositIndex: not a deposit");
  if (deposit.bridge_id != bridge_id_) {
    throw std::invalid_argument("DepositIndex: deposit of bridge '" + deposit.bridge_id +
                                "' added to index of '" + bridge_id_ + "'");
  }
  const TxRef& ref = deposit.ref;
  if (deposits_.count(ref)) return;  // same event seen twice (e.g. replay)

  const auto& body = deposit.deposit();
  if (body.deposit_id) {
    if (auto it = by_id_.find(*body.deposit_id); it != by_id_.end()) {
      throw DuplicateDepositKey(PairById{bridge_id_, *body.deposit_id}, it->second, ref);
    }
  }
  if (auto it = by_hash_.find(ref.tx_hash); it != by_hash_.end()) {
    // Several deposits in one transaction alias under hash pairing; the
    // lowest log index owns the handle. A hash on two chains is a conflict.
    if (it->second.chain != ref.chain) {
      throw DuplicateDepositKey(PairByDepositHash{ref.tx_hash}, it->second, ref);
    }
    if (ref < it->second) it->second = ref;
  } else {
    by_hash_.emplace(ref.tx_hash, ref);
  }
  if (body.deposit_id) by_id_.emplace(*body.deposit_id, ref);
  deposits_.emplace(ref, deposit);
}

const ChainEvent* DepositIndex::deposit(const TxRef& ref) const {
  const auto it = deposits_.find(ref);
  return it == deposits_.end() ? nullptr : &it->second;
}

const ChainEvent* DepositIndex::find(const PairKey& key) const {
  if (const auto* k = std::get_if<PairById>(&key)) {
    if (k->bridge_id != bridge_id_) return nullptr;
    const auto it = by_id_.find(k->deposit_id);
    return it == by_id_.end() ? nullptr : deposit(it->second);
  }
  if (const auto* k = std::get_if<PairByDepositHash>(&key)) {
    const auto it = by_hash_.find(k->tx_hash);
    return it == by_hash_.end() ? nullptr : deposit(it->second);
  }
  const auto& ext = std::get<PairExternal>(key);
  const auto it = external_.find(ext.key);
  if (it == external_.end()) return nullptr;
  const auto hit = by_hash_.find(it->second.deposit_tx);
  if (hit == by_hash_.end() || hit->second.chain != it->second.chain) return nullptr;
  return deposit(hit->second);
}

DepositIndex build_index(const std::string& bridge_id, std::span<const ChainEvent> deposits,
                         const ExternalMap& external) {
  DepositIndex index(bridge_id, external);
  for (const auto& d : deposits) index.add(d);
  return index;
}

namespace {

bool strategy_enabled(const PairKey& key, const BridgeConfig& bridge) {
  switch (key.index()) {
    case 0: return bridge.allows(PairingStrategy::ById);
    case 1: return bridge.allows(PairingStrategy::ByDepositHash);
    default: return bridge.allows(PairingStrategy::External);
  }
}

}  // namespace

PairOutcome pair_withdrawal(const ChainEvent& withdrawal, const DepositIndex& index,
                            const BridgeConfig& bridge) {
  const auto& w = withdrawal.withdrawal();
  std::optional<PairKey> key = w.pair_ref;
  if (key && !strategy_enabled(*key, bridge)) key.reset();
  if (!key && bridge.allows(PairingStrategy::External)) {
    // Out-of-band lookup keyed by the withdrawal's own transaction.
    if (index.has_external(withdrawal.ref.tx_hash)) key = PairExternal{withdrawal.ref.tx_hash};
  }
  if (!key) return pair::Unpairable{};
  if (const ChainEvent* d = index.find(*key)) return pair::Matched{d};
  return pair::NoDeposit{*key};
}

}  // namespace bridgeaudit

#pragma once

// Deterministic synthetic multi-chain bridge traffic with labelled attacks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit::sim {

enum class AttackKind { FakeDeposit, UnbackedWithdrawal, Replay, AmountMismatch, WrongDestination };

inline constexpr std::size_t kAttackKindCount = 5;

std::string_view to_string(AttackKind k);
std::optional<AttackKind> parse_attack_kind(std::string_view s);
/// Verdict the auditor must reach for the attack withdrawal.
Category expected_category(AttackKind k);

struct ChainSpec {
  std::string name;
  std::int64_t finality_lag = 60;
  std::int64_t block_seconds = 3;
};

struct TokenSpec {
  std::string symbol;
  bool reflection = false;  // balance-scaling token; forces Indeterminate fees
};

struct BridgeSpec {
  std::string id;
  std::vector<std::string> chains;  // empty means all chains
  FeePolicy fee = fee::Indeterminate{};
  PairingStrategy pairing = PairingStrategy::ById;
  std::vector<TokenSpec> tokens{{"USDC", false}};
};

struct Injection {
  AttackKind kind = AttackKind::UnbackedWithdrawal;
  std::size_t count = 1;
  std::int64_t from = 0;  // seconds from scenario start
  std::optional<std::int64_t> to;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  UnixTime start_time = 1'700'000'000;
  std::int64_t duration = 86'400;
  std::uint64_t traffic_per_hour = 100;
  std::optional<std::uint64_t> benign_count;  // overrides traffic * duration
  std::int64_t max_delay = 3'600;             // extra wait after finality
  std::uint32_t pending_ppm = 50'000;         // deposits never withdrawn
  std::uint32_t zero_withdrawal_ppm = 0;
  std::vector<ChainSpec> chains;
  std::vector<BridgeSpec> bridges;
  std::vector<Injection> injections;

  std::uint64_t benign_flows() const;
};

/// Throws ConfigError.
ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& c);
/// Throws ConfigError on an unusable scenario.
void validate(const ScenarioConfig& c);

struct GroundTruthEntry {
  TxRef withdrawal;
  Category category = Category::Balanced;
  AttackKind kind = AttackKind::UnbackedWithdrawal;
  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

using GroundTruth = std::vector<GroundTruthEntry>;

nlohmann::json to_json(const GroundTruthEntry& e);
GroundTruth load_ground_truth(const std::filesystem::path& path);

struct GeneratedTrace {
  std::map<std::string, std::vector<ChainEvent>> per_chain;  // each in block order
  GroundTruth truth;
  AuditConfig config;
  std::size_t benign_withdrawals = 0;
  std::size_t pending_deposits = 0;
  std::size_t zero_withdrawals = 0;

  /// Every event of every chain, in event order.
  std::vector<ChainEvent> all_events() const;
};

GeneratedTrace generate(const ScenarioConfig& config);

/// Writes `<chain>.jsonl` per chain, `ground_truth.jsonl` and `config.json`.
void write_trace(const GeneratedTrace& trace, const std::filesystem::path& dir);

struct ScoreReport {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  /// (expected, actual) -> count. "none" stands for a benign withdrawal
  /// or a missing finding.
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;

  double precision() const;
  double recall() const;
};

nlohmann::json to_json(const ScoreReport& s);

/// Exact set comparison on (withdrawal, category). Violations whose
/// category is in `benign` are left out of the false-positive count.
ScoreReport score(std::span<const Finding> findings, const GroundTruth& truth,
                  const std::set<Category>& benign = {});

}  // namespace bridgeaudit::sim

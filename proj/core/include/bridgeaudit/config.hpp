#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bridgeaudit/model.hpp"

namespace bridgeaudit {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fee {
struct Explicit {
  friend bool operator==(const Explicit&, const Explicit&) = default;
};
struct Fixed {
  Amount amount;
  friend bool operator==(const Fixed&, const Fixed&) = default;
};
struct Proportional {
  std::uint32_t ppm = 0;  // [0, 1'000'000), rounded down
  friend bool operator==(const Proportional&, const Proportional&) = default;
};
struct Indeterminate {
  friend bool operator==(const Indeterminate&, const Indeterminate&) = default;
};
}  // namespace fee

/// How bridge costs are computed for one (bridge, token).
using FeePolicy = std::variant<fee::Explicit, fee::Fixed, fee::Proportional, fee::Indeterminate>;

/// Throws ConfigError for ppm outside [0, 1'000'000).
FeePolicy make_proportional(std::uint32_t ppm);

/// Wrapped/native correspondence. Links are symmetric and the classes
/// are their transitive closure; every token is equivalent to itself.
class TokenEquivalence {
 public:
  void link(const TokenId& a, const TokenId& b);
  bool equivalent(const TokenId& a, const TokenId& b) const;
  /// Smallest member of the token's class (the token itself if unlinked).
  TokenId representative(const TokenId& t) const;
  /// Non-trivial classes, each sorted; used for serialization.
  std::vector<std::vector<TokenId>> classes() const;

 private:
  std::map<TokenId, std::size_t> class_of_;
  std::vector<std::set<TokenId>> classes_;
};

enum class PairingStrategy { ById, ByDepositHash, External };

struct ReflectionScale {
  TokenId token;
  std::uint64_t from_block = 0;
  std::uint64_t to_block = UINT64_MAX;  // inclusive
  Amount numerator{1};
  Amount denominator{1};
};

struct BridgeConfig {
  std::string id;
  std::vector<PairingStrategy> pairing{PairingStrategy::ById, PairingStrategy::ByDepositHash,
                                       PairingStrategy::External};
  bool trusted_claims = false;
  bool treat_missing_transfer_as_zero = false;
  std::map<ChainId, std::set<std::string>> addresses;
  std::map<TokenId, FeePolicy> fees;
  FeePolicy default_fee = fee::Indeterminate{};
  TokenEquivalence equivalence;
  std::vector<ReflectionScale> reflection;
  std::set<TokenId> test_tokens;
  std::set<TokenId> known_tokens;  // empty means "no registry"
  /// Explicit log-index offsets (transfer minus bridge event) to try
  /// before the nearest-candidate rule.
  std::vector<std::int64_t> transfer_offsets;

  bool allows(PairingStrategy s) const;
  bool is_bridge_address(const ChainId& chain, std::string_view address) const;
  const FeePolicy& fee_for(const TokenId& token) const;
  TokenFlags flags_for(const TokenId& token) const;
  /// (numerator, denominator) covering the block, if configured.
  std::optional<std::pair<Amount, Amount>> reflection_scale(const TokenId& token,
                                                            std::uint64_t block) const;
  bool is_known_token(const TokenId& token) const;
};

struct AuditConfig {
  std::vector<ChainInfo> chains;
  std::map<std::string, BridgeConfig, std::less<>> bridges;
  bool strict_fees = false;
  bool alert_on_unknown_token = true;
  /// External-map files, resolved relative to the config file.
  std::vector<std::filesystem::path> external_maps;

  /// Config for the bridge, or an all-default one for unknown ids.
  const BridgeConfig& bridge(std::string_view id) const;
  std::optional<ChainInfo> chain(const ChainId& id) const;
};

AuditConfig parse_audit_config(const nlohmann::json& j);
AuditConfig load_audit_config(const std::filesystem::path& path);
nlohmann::json to_json(const AuditConfig& cfg);

std::string to_string(const FeePolicy& policy);

/// Fee policy objects as they appear in config files, e.g.
/// {"policy":"proportional","ppm":1000}. Throws ConfigError.
FeePolicy fee_from(const nlohmann::json& j);
nlohmann::json fee_to_json(const FeePolicy& p);

/// "id" | "hash" | "external". Throws ConfigError.
PairingStrategy strategy_from(const std::string& s);
std::string_view strategy_name(PairingStrategy s);

}  // namespace bridgeaudit

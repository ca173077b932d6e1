#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "builders.hpp"

using namespace bridgeaudit;
using nlohmann::json;

namespace {

json sample() {
  return json::parse(R"({
    "chains": [{"name": "eth", "finality_lag": 780}, {"name": "bsc", "finality_lag": 45}],
    "strict_fees": false,
    "bridges": [{
      "id": "multichain",
      "pairing": ["id", "hash"],
      "trusted_claims": false,
      "addresses": {"eth": ["0xB000000000000000000000000000000000000001"]},
      "default_fee": {"policy": "proportional", "ppm": 1000},
      "fees": [{"token": "eth:0xaaaa", "policy": "fixed", "amount": "5000"},
               {"token": "bsc:0xcccc", "policy": "fiat"}],
      "equivalences": [["eth:0xaaaa", "bsc:0xbbbb", "ftm:0xdddd"]],
      "reflection": [{"token": "eth:0xeeee", "from_block": 10, "to_block": 20,
                      "numerator": "100", "denominator": "64"}],
      "test_tokens": ["bsc:0x7e57"],
      "known_tokens": ["eth:0xaaaa", "bsc:0xbbbb"],
      "transfer_offsets": [-1, 1]
    }]
  })");
}

}  // namespace

TEST_CASE("config fields are decoded") {
  const AuditConfig cfg = parse_audit_config(sample());
  REQUIRE(cfg.chains.size() == 2);
  CHECK(cfg.chain(ChainId("eth"))->finality_lag == 780);
  CHECK_FALSE(cfg.chain(ChainId("sol")));
  const BridgeConfig& b = cfg.bridge("multichain");
  CHECK(b.allows(PairingStrategy::ById));
  CHECK_FALSE(b.allows(PairingStrategy::External));
  CHECK(b.is_bridge_address(ChainId("eth"), "0xb000000000000000000000000000000000000001"));
  CHECK_FALSE(b.is_bridge_address(ChainId("bsc"), "0xb000000000000000000000000000000000000001"));
  CHECK(b.fee_for(bt::tok("eth", "0xaaaa")) == FeePolicy{fee::Fixed{5000}});
  CHECK(b.fee_for(bt::tok("bsc", "0xcccc")) == FeePolicy{fee::Indeterminate{}});
  CHECK(b.fee_for(bt::tok("eth", "0x9999")) == FeePolicy{fee::Proportional{1000}});
  CHECK(b.equivalence.equivalent(bt::tok("bsc", "0xbbbb"), bt::tok("ftm", "0xdddd")));
  CHECK(b.reflection_scale(bt::tok("eth", "0xeeee"), 15)->first == Amount(100));
  CHECK_FALSE(b.reflection_scale(bt::tok("eth", "0xeeee"), 21));
  CHECK(b.flags_for(bt::tok("eth", "0xeeee")).has(TokenFlag::Reflection));
  CHECK(b.flags_for(bt::tok("bsc", "0x7e57")).has(TokenFlag::TestToken));
  CHECK(b.is_known_token(bt::tok("eth", "0xaaaa")));
  CHECK_FALSE(b.is_known_token(bt::tok("eth", "0x9999")));
  CHECK(b.transfer_offsets == std::vector<std::int64_t>{-1, 1});
  CHECK(cfg.alert_on_unknown_token);
}

TEST_CASE("unknown bridges fall back to defaults") {
  const AuditConfig cfg = parse_audit_config(sample());
  const BridgeConfig& b = cfg.bridge("nope");
  CHECK(b.id.empty());
  CHECK(b.fee_for(bt::tok("eth")) == FeePolicy{fee::Indeterminate{}});
  CHECK(b.is_known_token(bt::tok("eth")));
}

TEST_CASE("config survives a JSON round trip") {
  const AuditConfig a = parse_audit_config(sample());
  const json once = to_json(a);
  const AuditConfig b = parse_audit_config(once);
  CHECK(to_json(b) == once);
}

TEST_CASE("proportional ppm is bounded") {
  CHECK(make_proportional(0) == FeePolicy{fee::Proportional{0}});
  CHECK(make_proportional(999'999) == FeePolicy{fee::Proportional{999'999}});
  CHECK_THROWS_AS(make_proportional(1'000'000), ConfigError);
  CHECK_THROWS_AS(fee_from(json{{"policy", "proportional"}, {"ppm", 1'000'000}}), ConfigError);
  CHECK_THROWS_AS(fee_from(json{{"policy", "proportional"}, {"ppm", -1}}), ConfigError);
  CHECK_THROWS_AS(fee_from(json{{"policy", "bogus"}}), ConfigError);
}

TEST_CASE("bad configs are rejected") {
  auto dup = sample();
  dup["bridges"].push_back(dup["bridges"][0]);
  CHECK_THROWS_AS(parse_audit_config(dup), ConfigError);
  auto lag = sample();
  lag["chains"][0]["finality_lag"] = -1;
  CHECK_THROWS_AS(parse_audit_config(lag), ConfigError);
  auto tok = sample();
  tok["bridges"][0]["known_tokens"] = {"noseparator"};
  CHECK_THROWS_AS(parse_audit_config(tok), ConfigError);
  auto den = sample();
  den["bridges"][0]["reflection"][0]["denominator"] = "0";
  CHECK_THROWS_AS(parse_audit_config(den), ConfigError);
  auto strat = sample();
  strat["bridges"][0]["pairing"] = {"guess"};
  CHECK_THROWS_AS(parse_audit_config(strat), ConfigError);
  CHECK_THROWS_AS(parse_audit_config(json::array()), ConfigError);
}

TEST_CASE("external map paths resolve relative to the config file") {
  bt::TempDir dir("config");
  auto j = sample();
  j["external_maps"] = {"maps/ext.jsonl"};
  std::ofstream(dir.path / "cfg.json") << j.dump();
  const AuditConfig cfg = load_audit_config(dir.path / "cfg.json");
  REQUIRE(cfg.external_maps.size() == 1);
  CHECK(cfg.external_maps[0] == dir.path / "maps/ext.jsonl");
  CHECK_THROWS_AS(load_audit_config(dir.path / "missing.json"), ConfigError);
}

TEST_CASE("token equivalence is the transitive closure") {
  TokenEquivalence eq;
  eq.link(bt::tok("a", "0x1"), bt::tok("b", "0x2"));
  eq.link(bt::tok("c", "0x3"), bt::tok("d", "0x4"));
  CHECK_FALSE(eq.equivalent(bt::tok("a", "0x1"), bt::tok("d", "0x4")));
  eq.link(bt::tok("b", "0x2"), bt::tok("c", "0x3"));
  CHECK(eq.equivalent(bt::tok("a", "0x1"), bt::tok("d", "0x4")));
  CHECK(eq.equivalent(bt::tok("z", "0x9"), bt::tok("z", "0x9")));
  CHECK(eq.representative(bt::tok("d", "0x4")) == bt::tok("a", "0x1"));
  CHECK(eq.classes().size() == 1);
  CHECK(eq.classes()[0].size() == 4);
}

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "doctest.h"

#include "bridgeaudit/store.hpp"
#include "builders.hpp"

using namespace bridgeaudit;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kDay = 86'400;
constexpr std::int64_t kWindow = 90 * kDay;
const FileStore::Options kFast{false};

ChainEvent dep(const std::string& hash, std::uint64_t id = 1) {
  bt::Dep d;
  d.hash = hash;
  d.id = id;
  d.fee = Amount(3);
  return bt::deposit(d);
}

TxRef wref(const std::string& hash) { return TxRef{ChainId("bsc"), hash, 0}; }

}  // namespace

TEST_CASE("deposits round-trip and unknown refs miss") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  const ChainEvent d = dep("0xd1", 4);
  s.put_deposit(d, ResolvedAmount{Amount(97), AmountSource::AdjacentTransfer, true}, 100);
  const auto got = s.get_deposit_record(d.ref);
  REQUIRE(got);
  CHECK(serialize_event(got->event) == serialize_event(d));
  CHECK(got->inflow == Resolution{ResolvedAmount{Amount(97), AmountSource::AdjacentTransfer, true}});
  CHECK(got->tier == Tier::Hot);
  CHECK_FALSE(s.get_deposit(TxRef{ChainId("eth"), "0xnone", 0}));
}

TEST_CASE("records persist across reopen") {
  bt::TempDir dir("store");
  {
    FileStore s(dir.path, kFast);
    s.put_deposit(dep("0xd1"), AmountUnresolvable{"no transfer"}, 1);
    s.mark_redeemed(dep("0xd1").ref, wref("0xw1"));
    Finding f;
    f.withdrawal = wref("0xw1");
    f.category = Category::UnbackedWithdrawal;
    s.put_finding(f, true, 2);
    Checkpoint c;
    c.chains["eth"] = {10, 1000};
    c.horizon = 990;
    c.next_batch_id = 4;
    s.save_checkpoint(c);
  }
  FileStore s(dir.path, kFast);
  CHECK(s.get_deposit(dep("0xd1").ref));
  CHECK(std::holds_alternative<AmountUnresolvable>(s.get_deposit_record(dep("0xd1").ref)->inflow));
  CHECK(s.redeemer(dep("0xd1").ref) == wref("0xw1"));
  CHECK(s.has_finding("bsc:0xw1:0/UnbackedWithdrawal"));
  CHECK(s.unalerted_findings().size() == 1);
  const auto c = s.load_checkpoint();
  REQUIRE(c);
  CHECK(c->chains.at("eth") == ChainCursor{10, 1000});
  CHECK(c->horizon == 990);
  CHECK(c->next_batch_id == 4);
  CHECK_FALSE(fs::exists(dir.path / "checkpoint.json.tmp"));
}

TEST_CASE("mark_redeemed is a compare-and-set") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  const TxRef d = dep("0xd1").ref;
  CHECK_FALSE(s.mark_redeemed(d, wref("0xw1")));
  CHECK(s.mark_redeemed(d, wref("0xw2")) == wref("0xw1"));
  // Idempotent for the same pair: reports itself as the redeemer.
  CHECK(s.mark_redeemed(d, wref("0xw1")) == wref("0xw1"));
  CHECK(s.ledger_entries().size() == 1);
}

TEST_CASE("concurrent markers: exactly one wins") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  const TxRef d = dep("0xd1").ref;
  std::vector<std::optional<TxRef>> results(16);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < results.size(); ++i) {
    threads.emplace_back([&, i] { results[i] = s.mark_redeemed(d, wref("0xw" + std::to_string(i))); });
  }
  for (auto& t : threads) t.join();
  const auto winner = s.redeemer(d);
  REQUIRE(winner);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i]) {
      ++wins;
      CHECK(*winner == wref("0xw" + std::to_string(i)));
    } else {
      CHECK(*results[i] == *winner);
    }
  }
  CHECK(wins == 1);
}

TEST_CASE("eviction by age") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  const UnixTime now = 1'000 * kDay;
  s.put_deposit(dep("0xold"), ResolvedAmount{Amount(1)}, now - 91 * kDay);
  s.put_deposit(dep("0xnew", 2), ResolvedAmount{Amount(1)}, now - 89 * kDay);
  CHECK(s.evict_to_cold(now, kWindow) == 1);
  CHECK(s.tier_of(deposit_key(dep("0xold").ref)) == Tier::Cold);
  CHECK(s.tier_of(deposit_key(dep("0xnew", 2).ref)) == Tier::Hot);
  // Still found, now through the cold tier.
  const auto old = s.get_deposit_record(dep("0xold").ref);
  REQUIRE(old);
  CHECK(old->tier == Tier::Cold);
  CHECK(s.evict_to_cold(now, kWindow) == 0);
  CHECK_THROWS_AS(s.evict_to_cold(now, 0), std::invalid_argument);
}

TEST_CASE("tiny window forces eviction, and tiers survive reopen") {
  bt::TempDir dir("store");
  {
    FileStore s(dir.path, kFast);
    s.put_deposit(dep("0xd1"), ResolvedAmount{Amount(5)}, 10);
    CHECK(s.evict_to_cold(12, 1) == 1);
  }
  FileStore s(dir.path, kFast);
  CHECK(s.cold_size() == 1);
  CHECK(s.hot_size() == 0);
  CHECK(s.get_deposit(dep("0xd1").ref));
}

TEST_CASE("1000 mixed-age records move exactly as a timestamp filter says") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  std::mt19937_64 rng(1000);
  const UnixTime now = 500 * kDay;
  std::size_t expect = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const UnixTime written = now - static_cast<UnixTime>(rng() % (180 * kDay));
    if (written < now - kWindow) ++expect;
    s.put_deposit(dep("0x" + std::to_string(i), i), ResolvedAmount{Amount(i)}, written);
  }
  CHECK(s.evict_to_cold(now, kWindow) == expect);
  CHECK(s.cold_size() == expect);
  CHECK(s.hot_size() == 1000 - expect);
  std::size_t seen = 0;
  s.for_each_deposit([&](const StoredDeposit&) { ++seen; });
  CHECK(seen == 1000);
}

TEST_CASE("a torn tail is dropped on open") {
  bt::TempDir dir("store");
  {
    FileStore s(dir.path, kFast);
    s.put_deposit(dep("0xd1", 1), ResolvedAmount{Amount(5)}, 1);
    s.put_deposit(dep("0xd2", 2), ResolvedAmount{Amount(6)}, 1);
  }
  const auto hot = dir.path / "hot.log";
  const auto full = fs::file_size(hot);
  fs::resize_file(hot, full - 7);
  {
    FileStore s(dir.path, kFast);
    CHECK(s.get_deposit(dep("0xd1", 1).ref));
    CHECK_FALSE(s.get_deposit(dep("0xd2", 2).ref));
    s.put_deposit(dep("0xd3", 3), ResolvedAmount{Amount(7)}, 2);
  }
  FileStore s(dir.path, kFast);
  CHECK(s.get_deposit(dep("0xd3", 3).ref));
  CHECK(s.hot_size() == 2);
}

TEST_CASE("a record present in both tiers is read from cold") {
  bt::TempDir dir("store");
  {
    FileStore s(dir.path, kFast);
    s.put_deposit(dep("0xd1"), ResolvedAmount{Amount(5)}, 1);
  }
  // Simulate a crash after the cold append but before the hot rewrite.
  fs::copy_file(dir.path / "hot.log", dir.path / "cold.log", fs::copy_options::overwrite_existing);
  FileStore s(dir.path, kFast);
  CHECK(s.cold_size() == 1);
  CHECK(s.hot_size() == 0);
}

TEST_CASE("findings dedup and alert markers") {
  bt::TempDir dir("store");
  FileStore s(dir.path, kFast);
  Finding a;
  a.withdrawal = wref("0xa");
  a.block_time = 20;
  a.category = Category::DoubleSpend;
  Finding b = a;
  b.withdrawal = wref("0xb");
  b.block_time = 10;
  Finding quiet = a;
  quiet.withdrawal = wref("0xq");
  quiet.category = Category::Balanced;
  s.put_finding(a, true, 1);
  s.put_finding(a, true, 2);
  s.put_finding(b, true, 1);
  s.put_finding(quiet, false, 1);
  auto un = s.unalerted_findings();
  REQUIRE(un.size() == 2);
  CHECK(un[0].withdrawal.tx_hash == "0xb");  // event order
  s.mark_alerted(b.id(), 1, 3);
  CHECK(s.alerted(b.id()));
  un = s.unalerted_findings();
  REQUIRE(un.size() == 1);
  CHECK(un[0] == a);
}

TEST_CASE("replaying a batch after a crash yields one copy of each finding") {
  bt::TempDir dir("store");
  Finding f;
  f.withdrawal = wref("0xw");
  f.category = Category::UnbackedWithdrawal;
  {
    FileStore s(dir.path, kFast);
    s.mark_redeemed(dep("0xd").ref, wref("0xw0"));
    s.put_finding(f, true, 1);
    // crash here: no alert marker was written
  }
  FileStore s(dir.path, kFast);
  s.mark_redeemed(dep("0xd").ref, wref("0xw0"));  // batch replay
  s.put_finding(f, true, 1);
  const auto un = s.unalerted_findings();
  REQUIRE(un.size() == 1);
  CHECK(un[0] == f);
  s.mark_alerted(f.id(), 1, 2);
  CHECK(s.unalerted_findings().empty());
}

TEST_CASE("checkpoint JSON round trip") {
  Checkpoint c;
  c.chains["bsc"] = {5, 50};
  c.ledger_digest = "abc";
  c.pending = nlohmann::json::array({{{"x", 1}}});
  const Checkpoint back = checkpoint_from_json(to_json(c));
  CHECK(back.chains == c.chains);
  CHECK(back.ledger_digest == "abc");
  CHECK_FALSE(back.horizon);
  CHECK(back.pending == c.pending);
}

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "bridgeaudit/monitor.hpp"
#include "builders.hpp"

using namespace bridgeaudit;

namespace {

const MonitorConfig kMon{10, 90 * 86'400, false};

ChainEvent dep(const std::string& hash, std::uint64_t id, UnixTime t, std::uint64_t amount = 100) {
  bt::Dep d;
  d.hash = hash;
  d.id = id;
  d.t = t;
  d.amount = amount;
  return bt::deposit(d);
}

ChainEvent wd(const std::string& hash, std::optional<std::uint64_t> id, UnixTime t,
              std::uint64_t amount = 100) {
  bt::Wd w;
  w.hash = hash;
  if (id) w.pair = PairById{"b", *id};
  w.t = t;
  w.amount = amount;
  return bt::withdrawal(w);
}

struct Harness {
  AuditConfig cfg = bt::simple_config();
  TraceSource eth;
  TraceSource bsc;
  FileStore store;
  MemoryAlertSink sink;
  LiveMonitor mon;

  Harness(const std::filesystem::path& dir, std::vector<ChainEvent> eth_events,
          std::vector<ChainEvent> bsc_events, std::int64_t eth_lag = 0, std::int64_t bsc_lag = 0,
          MonitorConfig mc = kMon)
      : eth(ChainInfo{ChainId("eth"), eth_lag}, std::move(eth_events)),
        bsc(ChainInfo{ChainId("bsc"), bsc_lag}, std::move(bsc_events)),
        store(dir, FileStore::Options{false}),
        mon(cfg, mc, {&eth, &bsc}, store, sink) {}
};

std::set<std::string> ids(const std::vector<Alert>& alerts) {
  std::set<std::string> out;
  for (const auto& a : alerts) out.insert(a.finding.id());
  return out;
}

class BrokenSource final : public ChainSource {
 public:
  explicit BrokenSource(ChainInfo c) : chain_(std::move(c)) {}
  const ChainInfo& chain() const override { return chain_; }
  SourceBatch next_finalized_batch(UnixTime now) override {
    if (broken) throw std::runtime_error("rpc timeout");
    return {{}, now};
  }
  void resume_after(const ChainCursor&) override {}
  bool broken = true;

 private:
  ChainInfo chain_;
};

}  // namespace

TEST_CASE("deposit on A, withdrawal on B, both final: balanced, no alert") {
  bt::TempDir dir("mon");
  Harness h(dir.path, {dep("0xd", 1, 10)}, {wd("0xw", 1, 20)});
  const PollReport r = h.mon.poll_once(30);
  CHECK(r.events_seen == 2);
  CHECK(r.withdrawals_audited == 1);
  CHECK(r.alerts_emitted == 0);
  CHECK(r.deferred == 0);
  CHECK(h.store.has_finding("bsc:0xw:1/Balanced"));
  CHECK(h.sink.alerts().empty());
}

TEST_CASE("a withdrawal past the horizon waits for the next poll") {
  bt::TempDir dir("mon");
  Harness h(dir.path, {dep("0xd", 1, 50)}, {wd("0xw", 7, 100)}, 10, 0);
  const PollReport first = h.mon.poll_once(100);
  CHECK(first.horizon == 90);
  CHECK(first.deferred == 1);
  CHECK(first.withdrawals_audited == 0);
  CHECK(first.alerts_emitted == 0);
  const PollReport second = h.mon.poll_once(110);
  CHECK(second.horizon == 100);
  CHECK(second.deferred == 0);
  CHECK(second.withdrawals_audited == 1);
  CHECK(second.alerts_emitted == 1);
  REQUIRE(h.sink.alerts().size() == 1);
  CHECK(h.sink.alerts()[0].finding.category == Category::UnbackedWithdrawal);
  CHECK(h.sink.alerts()[0].batch_id == 1);
  CHECK(h.sink.alerts()[0].emitted_at == 110);
}

TEST_CASE("one unbacked withdrawal, one alert, no repeats") {
  bt::TempDir dir("mon");
  Harness h(dir.path, {dep("0xd", 1, 5)}, {wd("0xok", 1, 12), wd("0xbad", 99, 25)});
  std::size_t alerts = 0;
  std::optional<UnixTime> alerted_at;
  for (UnixTime now = 10; now <= 60; now += 10) {
    const auto r = h.mon.poll_once(now);
    if (r.alerts_emitted && !alerted_at) alerted_at = now;
    alerts += r.alerts_emitted;
  }
  CHECK(alerts == 1);
  CHECK(alerted_at == 30);  // first poll whose horizon covers t=25
  CHECK(h.sink.alerts().size() == 1);
}

TEST_CASE("an attack-free trace raises nothing") {
  bt::TempDir dir("mon");
  std::vector<ChainEvent> e, b;
  for (std::uint64_t i = 0; i < 20; ++i) {
    e.push_back(dep("0xd" + std::to_string(i), i, static_cast<UnixTime>(i * 5)));
    b.push_back(wd("0xw" + std::to_string(i), i, static_cast<UnixTime>(i * 5 + 3)));
  }
  Harness h(dir.path, e, b);
  for (UnixTime now = 0; now <= 200; now += 10) h.mon.poll_once(now);
  CHECK(h.sink.alerts().empty());
  CHECK(h.store.ledger_entries().size() == 20);
}

TEST_CASE("double spend across polls is caught through the store ledger") {
  bt::TempDir dir("mon");
  Harness h(dir.path, {dep("0xd", 1, 5)}, {wd("0xw1", 1, 10), wd("0xw2", 1, 40)});
  h.mon.poll_once(20);
  h.mon.poll_once(50);
  REQUIRE(h.sink.alerts().size() == 1);
  CHECK(h.sink.alerts()[0].finding.category == Category::DoubleSpend);
  CHECK(h.sink.alerts()[0].finding.withdrawal.tx_hash == "0xw2");
}

TEST_CASE("restart from the checkpoint neither loses nor repeats alerts") {
  std::vector<ChainEvent> e = {dep("0xd1", 1, 5), dep("0xd2", 2, 33)};
  std::vector<ChainEvent> b = {wd("0xa", 9, 12), wd("0xb", 1, 15), wd("0xc", 1, 44),
                               wd("0xd", 2, 50, 101)};
  bt::TempDir ref_dir("mon-ref");
  Harness ref(ref_dir.path, e, b, 0, 5);
  for (UnixTime now = 10; now <= 100; now += 10) ref.mon.poll_once(now);
  const auto want = ids(ref.sink.alerts());
  CHECK(want.size() == 3);

  for (UnixTime stop_at = 10; stop_at <= 100; stop_at += 10) {
    bt::TempDir dir("mon-restart");
    std::vector<Alert> seen;
    {
      Harness first(dir.path, e, b, 0, 5);
      for (UnixTime now = 10; now <= stop_at; now += 10) first.mon.poll_once(now);
      seen = first.sink.alerts();
    }
    Harness second(dir.path, e, b, 0, 5);
    for (UnixTime now = stop_at + 10; now <= 100; now += 10) second.mon.poll_once(now);
    for (const auto& a : second.sink.alerts()) seen.push_back(a);
    CHECK(seen.size() == want.size());
    CHECK(ids(seen) == want);
  }
}

TEST_CASE("kills at every crash point recover to the same alert set") {
  std::vector<ChainEvent> e = {dep("0xd1", 1, 5), dep("0xd2", 2, 33)};
  std::vector<ChainEvent> b = {wd("0xa", 9, 12), wd("0xb", 1, 15), wd("0xc", 1, 44),
                               wd("0xd", 2, 50, 101)};
  bt::TempDir ref_dir("mon-ref");
  Harness ref(ref_dir.path, e, b);
  for (UnixTime now = 10; now <= 100; now += 10) ref.mon.poll_once(now);
  const auto want = ids(ref.sink.alerts());

  for (const std::string point : {"deposit", "finding", "checkpoint", "emit"}) {
    for (int nth = 1; nth <= 3; ++nth) {
      bt::TempDir dir("mon-kill");
      std::vector<Alert> seen;
      UnixTime now = 10;
      bool crashed = false;
      {
        Harness first(dir.path, e, b);
        int hits = 0;
        first.mon.set_crash_hook([&](std::string_view p) {
          if (p == point && ++hits == nth) throw SimulatedCrash{std::string(p)};
        });
        try {
          for (; now <= 100; now += 10) first.mon.poll_once(now);
        } catch (const SimulatedCrash&) {
          crashed = true;
        }
        seen = first.sink.alerts();
      }
      Harness second(dir.path, e, b);
      for (; now <= 100; now += 10) second.mon.poll_once(now);
      for (const auto& a : second.sink.alerts()) seen.push_back(a);
      CAPTURE(point);
      CAPTURE(nth);
      CHECK(ids(seen) == want);
      if (!crashed) CHECK(seen.size() == want.size());
    }
  }
}

TEST_CASE("a failing source is reported and holds the horizon") {
  bt::TempDir dir("mon");
  AuditConfig cfg = bt::simple_config();
  TraceSource eth(ChainInfo{ChainId("eth"), 0}, {dep("0xd", 1, 5)});
  BrokenSource bsc(ChainInfo{ChainId("bsc"), 0});
  FileStore store(dir.path, FileStore::Options{false});
  MemoryAlertSink sink;
  LiveMonitor mon(cfg, kMon, {&eth, &bsc}, store, sink);
  const auto r = mon.poll_once(10);
  CHECK(r.failed_sources == 1);
  CHECK_FALSE(r.horizon);
  CHECK(r.events_seen == 1);
  bsc.broken = false;
  const auto ok = mon.poll_once(20);
  CHECK(ok.failed_sources == 0);
  CHECK(ok.horizon == 20);
  bsc.broken = true;
  CHECK(mon.poll_once(30).horizon == 20);
}

TEST_CASE("parallel fetch produces the same alerts as sequential fetch") {
  std::vector<ChainEvent> e, b;
  for (std::uint64_t i = 0; i < 30; ++i) {
    e.push_back(dep("0xd" + std::to_string(i), i, static_cast<UnixTime>(i * 7)));
    b.push_back(wd("0xw" + std::to_string(i), i % 3 == 0 ? i + 1000 : i,
                   static_cast<UnixTime>(i * 7 + 4), i % 5 == 0 ? 101 : 100));
  }
  bt::TempDir d1("mon-seq");
  bt::TempDir d2("mon-par");
  MonitorConfig par = kMon;
  par.parallel_fetch = true;
  Harness seq(d1.path, e, b);
  Harness pa(d2.path, e, b, 0, 0, par);
  for (UnixTime now = 0; now <= 300; now += 10) {
    const auto x = seq.mon.poll_once(now);
    const auto y = pa.mon.poll_once(now);
    CHECK(x.alerts_emitted == y.alerts_emitted);
    CHECK(x.batch_id == y.batch_id);
  }
  const auto a = seq.sink.alerts();
  const auto c = pa.sink.alerts();
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].finding == c[i].finding);
    CHECK(a[i].batch_id == c[i].batch_id);
  }
  CHECK(a.size() == 10 + 4);  // unbacked every third, over-withdrawals on the rest of i%5==0
}

TEST_CASE("unknown tokens alert when a registry is configured") {
  bt::TempDir dir("mon");
  Harness h(dir.path, {dep("0xd", 1, 5)}, {wd("0xw", 1, 10)});
  h.cfg.bridges.at("b").known_tokens = {bt::tok("eth", "0xaaaa")};
  h.mon.poll_once(20);
  REQUIRE(h.sink.alerts().size() == 1);
  CHECK(h.sink.alerts()[0].finding.category == Category::Balanced);
}

TEST_CASE("file tail reads only complete lines and resumes after a cursor") {
  bt::TempDir dir("tail");
  const auto path = dir.path / "eth.jsonl";
  FileTailSource src(ChainInfo{ChainId("eth"), 5}, path);
  CHECK(src.next_finalized_batch(100).events.empty());  // file absent

  const std::string l1 = serialize_event(dep("0xd1", 1, 10));
  const std::string l2 = serialize_event(dep("0xd2", 2, 20));
  {
    std::ofstream out(path);
    out << l1 << "\n" << "{broken\n" << l2.substr(0, 20);
  }
  auto b1 = src.next_finalized_batch(100);
  REQUIRE(b1.events.size() == 1);
  CHECK(b1.finalized_head_time == 95);
  {
    std::ofstream out(path, std::ios::app);
    out << l2.substr(20) << "\n";
  }
  // Not final yet at now=24 (head 19), final at now=25.
  CHECK(src.next_finalized_batch(24).events.empty());
  auto b2 = src.next_finalized_batch(25);
  REQUIRE(b2.events.size() == 1);
  CHECK(b2.events[0].ref.tx_hash == "0xd2");

  FileTailSource again(ChainInfo{ChainId("eth"), 0}, path);
  again.resume_after(ChainCursor{10, 10});
  auto b3 = again.next_finalized_batch(100);
  REQUIRE(b3.events.size() == 1);
  CHECK(b3.events[0].ref.tx_hash == "0xd2");
}

TEST_CASE("alert sinks") {
  bt::TempDir dir("sink");
  Finding f;
  f.withdrawal = TxRef{ChainId("bsc"), "0xw", 0};
  f.category = Category::UnbackedWithdrawal;
  f.outflow = 120000;
  f.bridge = "wormhole";
  const Alert a{f, 3, 77};

  JsonlAlertSink jl(dir.path / "alerts.jsonl");
  jl.emit(a);
  jl.emit(a);
  std::ifstream in(dir.path / "alerts.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("batch_id") == 3);
    CHECK(j.at("category") == "UnbackedWithdrawal");
    CHECK(j.at("amounts").at("outflow") == "120000");
    CHECK(j.at("emitted_at") == 77);
    ++n;
  }
  CHECK(n == 2);

  WebhookOutboxSink box(dir.path / "outbox", "https://hooks.example/alerts");
  box.emit(a);
  box.emit(a);  // same batch and finding: overwritten, not duplicated
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path / "outbox")) {
    ++files;
    CHECK(entry.path().extension() == ".json");
    std::ifstream f2(entry.path());
    const auto j = nlohmann::json::parse(f2);
    CHECK(j.at("method") == "POST");
    CHECK(j.at("url") == "https://hooks.example/alerts");
    CHECK(j.at("body").at("id") == f.id());
  }
  CHECK(files == 1);
}

TEST_CASE("run_monitor polls on the simulated clock until told to stop") {
  bt::TempDir dir("loop");
  Harness h(dir.path, {dep("0xd", 1, 5)}, {wd("0xw", 9, 1025)});
  SimulatedClock clock(1000);
  std::atomic<bool> stop{false};
  std::vector<PollReport> reports;
  const auto polls = run_monitor(h.mon, clock, stop, 5, [&](const PollReport& r) { reports.push_back(r); });
  CHECK(polls == 5);
  CHECK(clock.now() == 1040);
  REQUIRE(reports.size() == 5);
  CHECK(reports[3].alerts_emitted == 1);  // t=1030 is the first poll covering 1025

  stop = true;
  CHECK(run_monitor(h.mon, clock, stop, 5) == 0);
}

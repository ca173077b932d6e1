#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "bridgeaudit/audit.hpp"
#include "bridgeaudit/ingest.hpp"
#include "bridgeaudit/simchain.hpp"
#include "bridgeaudit/store.hpp"

namespace ba = bridgeaudit;

namespace {

ba::sim::ScenarioConfig scenario(std::uint64_t flows) {
  ba::sim::ScenarioConfig c;
  c.seed = 42;
  c.benign_count = flows;
  c.duration = 7 * 86'400;
  c.chains = {{"eth", 780, 12}, {"bsc", 45, 3}, {"ftm", 5, 1}};
  c.bridges = {{"lock", {}, ba::make_proportional(1'000), ba::PairingStrategy::ById,
                {{"USDC", false}, {"SAFE", true}}},
               {"burn", {}, ba::fee::Explicit{}, ba::PairingStrategy::ByDepositHash,
                {{"WETH", false}}}};
  return c;
}

const ba::sim::GeneratedTrace& trace_10k() {
  static const auto t = ba::sim::generate(scenario(10'000));
  return t;
}

}  // namespace

static void BM_AmountMulDiv(benchmark::State& state) {
  const auto a = *ba::Amount::parse("115792089237316195423570985008687907853269984665640564039457");
  for (auto _ : state) benchmark::DoNotOptimize(a.mul_div_floor(ba::Amount(998'999), ba::Amount(1'000'000)));
}
BENCHMARK(BM_AmountMulDiv);

static void BM_ParseEventLine(benchmark::State& state) {
  const auto& events = trace_10k().per_chain.begin()->second;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < std::min<std::size_t>(events.size(), 1'000); ++i) {
    lines.push_back(ba::serialize_event(events[i]));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ba::parse_event_line(lines[i++ % lines.size()], 1));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ParseEventLine);

static void BM_AuditTrace(benchmark::State& state) {
  const auto& t = trace_10k();
  const auto events = t.all_events();
  for (auto _ : state) {
    auto report = ba::audit_trace(events, t.config);
    benchmark::DoNotOptimize(report.summary.analyzed);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_AuditTrace)->Unit(benchmark::kMillisecond);

static void BM_Generate(benchmark::State& state) {
  const auto c = scenario(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ba::sim::generate(c).benign_withdrawals);
}
BENCHMARK(BM_Generate)->Arg(1'000)->Arg(10'000)->Unit(benchmark::kMillisecond);

static void BM_StoreMarkRedeemed(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "bridgeaudit_bench_store";
  std::filesystem::remove_all(dir);
  ba::FileStore store(dir, ba::FileStore::Options{false});
  std::uint64_t n = 0;
  for (auto _ : state) {
    ++n;
    const ba::TxRef d{ba::ChainId("eth"), "0xd" + std::to_string(n), 0};
    const ba::TxRef w{ba::ChainId("bsc"), "0xw" + std::to_string(n), 0};
    benchmark::DoNotOptimize(store.mark_redeemed(d, w));
  }
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_StoreMarkRedeemed);
BENCHMARK_MAIN();

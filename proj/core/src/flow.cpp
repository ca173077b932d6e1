#include <algorithm>
#include <stdexcept>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::vector<FlowSeries> aggregate_flow(std::span<const ChainEvent> events, std::int64_t bucket,
                                       const AuditConfig& cfg) {
  if (bucket <= 0) throw std::invalid_argument("aggregate_flow: bucket must be > 0");

  const auto amounts = resolve_all(events, cfg);

  struct Delta {
    std::int64_t bucket_index;
    SignedAmount amount;
  };
  std::map<std::pair<std::string, TokenId>, std::vector<Delta>> deltas;
  std::optional<std::int64_t> first, last;

  for (const auto& e : events) {
    if (e.kind() == EventKind::Transfer) continue;
    const auto* r = std::get_if<ResolvedAmount>(&amounts.at(e.ref));
    if (r == nullptr) continue;
    const BridgeConfig& bridge = cfg.bridge(e.bridge_id);
    const bool is_deposit = e.kind() == EventKind::Deposit;
    const TokenId& token = is_deposit ? e.deposit().token : e.withdrawal().token;
    const std::int64_t bi = floor_div(e.block_time, bucket);
    first = first ? std::min(*first, bi) : bi;
    last = last ? std::max(*last, bi) : bi;
    SignedAmount v = r->amount.value();
    if (!is_deposit) v = -v;
    deltas[{e.bridge_id, bridge.equivalence.representative(token)}].push_back({bi, std::move(v)});
  }

  std::vector<FlowSeries> out;
  if (!first) return out;
  const auto n = static_cast<std::size_t>(*last - *first + 1);
  for (auto& [key, ds] : deltas) {
    std::vector<SignedAmount> per_bucket(n);
    for (auto& d : ds) per_bucket[static_cast<std::size_t>(d.bucket_index - *first)] += d.amount;
    FlowSeries s{key.first, key.second, {}};
    s.points.reserve(n);
    SignedAmount running = 0;
    for (std::size_t i = 0; i < n; ++i) {
      running += per_bucket[i];
      s.points.push_back({(*first + static_cast<std::int64_t>(i)) * bucket, running});
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bridgeaudit

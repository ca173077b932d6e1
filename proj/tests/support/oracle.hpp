#pragma once

// Brute-force reference auditor for small trusted-claim traces. It does
// not use the pairing index, the ledger or compute_max_outflow: every
// withdrawal is compared against every deposit directly.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "builders.hpp"

namespace oracle {

using namespace bridgeaudit;

struct Dep {
  std::string chain;
  std::int64_t t = 0;
  std::uint64_t id = 0;
  std::uint64_t amount = 0;
  bool dest_other = true;  // false sends it to its own chain
  bool has_recipient = true;
};

enum class Handle { None, Id, Hash };

struct Wd {
  std::string chain;
  std::int64_t t = 0;
  Handle handle = Handle::None;
  std::uint64_t key = 0;  // deposit id, or deposit index for Hash (>= size: unknown)
  std::uint64_t amount = 0;
  bool right_token = true;
};

enum class Fee { Indeterminate, Proportional, Fixed };

struct Trace {
  Fee fee = Fee::Indeterminate;
  std::vector<Dep> deps;
  std::vector<Wd> wds;
};

constexpr std::uint32_t kPpm = 100'000;
constexpr std::uint64_t kFixed = 2;

inline std::string dep_hash(std::size_t i) { return "0xd" + std::to_string(i); }
inline std::string wd_hash(std::size_t i) { return "0xw" + std::to_string(i); }
inline std::string other(const std::string& c) { return c == "eth" ? "bsc" : "eth"; }
inline std::string token_addr(const std::string& chain) { return chain == "eth" ? "0xaaaa" : "0xbbbb"; }

inline AuditConfig config_for(Fee f) {
  FeePolicy p = fee::Indeterminate{};
  if (f == Fee::Proportional) p = fee::Proportional{kPpm};
  if (f == Fee::Fixed) p = fee::Fixed{kFixed};
  return bt::simple_config(p);
}

inline std::vector<ChainEvent> events_of(const Trace& tr) {
  std::vector<ChainEvent> out;
  for (std::size_t i = 0; i < tr.deps.size(); ++i) {
    const Dep& d = tr.deps[i];
    bt::Dep b;
    b.chain = d.chain;
    b.hash = dep_hash(i);
    b.li = 0;
    b.t = d.t;
    b.id = d.id;
    b.amount = d.amount;
    b.dest = d.dest_other ? other(d.chain) : d.chain;
    if (!d.has_recipient) b.recipient.reset();
    b.token_addr = token_addr(d.chain);
    out.push_back(bt::deposit(b));
  }
  for (std::size_t j = 0; j < tr.wds.size(); ++j) {
    const Wd& w = tr.wds[j];
    bt::Wd b;
    b.chain = w.chain;
    b.hash = wd_hash(j);
    b.li = 0;
    b.t = w.t;
    b.amount = w.amount;
    b.token_addr = w.right_token ? token_addr(w.chain) : "0xcccc";
    if (w.handle == Handle::Id) b.pair = PairById{"b", w.key};
    if (w.handle == Handle::Hash) {
      b.pair = PairByDepositHash{w.key < tr.deps.size() ? dep_hash(w.key) : "0xffff"};
    }
    out.push_back(bt::withdrawal(b));
  }
  return out;
}

struct Verdict {
  std::string withdrawal;  // tx hash
  Category category;
  std::optional<std::string> deposit;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline std::uint64_t max_out(Fee f, std::uint64_t inflow) {
  switch (f) {
    case Fee::Indeterminate: return inflow;
    case Fee::Proportional: return inflow - (inflow * kPpm) / 1'000'000;
    case Fee::Fixed: return inflow > kFixed ? inflow - kFixed : 0;
  }
  return 0;
}

/// Expected findings in event order; empty with `failed` set when two
/// deposits share an id (the bridge is abandoned).
inline std::vector<Verdict> expect(const Trace& tr, bool* failed = nullptr) {
  for (std::size_t a = 0; a < tr.deps.size(); ++a) {
    for (std::size_t b = a + 1; b < tr.deps.size(); ++b) {
      if (tr.deps[a].id == tr.deps[b].id) {
        if (failed) *failed = true;
        return {};
      }
    }
  }
  if (failed) *failed = false;

  using Key = std::tuple<std::int64_t, std::string, std::int64_t, std::string>;
  auto dkey = [&](std::size_t i) {
    return Key{tr.deps[i].t, tr.deps[i].chain, tr.deps[i].t, dep_hash(i)};
  };
  auto wkey = [&](std::size_t j) {
    return Key{tr.wds[j].t, tr.wds[j].chain, tr.wds[j].t, wd_hash(j)};
  };

  std::vector<std::size_t> order(tr.wds.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return wkey(a) < wkey(b); });

  std::set<std::size_t> redeemed;
  std::vector<Verdict> out;
  for (std::size_t j : order) {
    const Wd& w = tr.wds[j];
    Verdict v{wd_hash(j), Category::Balanced, std::nullopt};
    if (w.handle == Handle::None) {
      v.category = Category::Unpairable;
      out.push_back(v);
      continue;
    }
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < tr.deps.size(); ++i) {
      const bool match = w.handle == Handle::Id ? tr.deps[i].id == w.key : i == w.key;
      if (match) hit = i;
    }
    if (!hit || !(dkey(*hit) < wkey(j))) {
      v.category = Category::UnbackedWithdrawal;
      out.push_back(v);
      continue;
    }
    const Dep& d = tr.deps[*hit];
    v.deposit = dep_hash(*hit);
    if (redeemed.count(*hit)) {
      v.category = Category::DoubleSpend;
      out.push_back(v);
      continue;
    }
    std::vector<Category> hits;
    const std::string dest = d.dest_other ? other(d.chain) : d.chain;
    if (dest != w.chain) hits.push_back(Category::DestinationMismatch);
    if (!w.right_token) hits.push_back(Category::TokenMismatch);
    if (w.amount > max_out(tr.fee, d.amount)) hits.push_back(Category::AmountExceedsInflow);
    if (w.amount == 0 && d.amount != 0) hits.push_back(Category::ZeroWithdrawal);
    if (!d.has_recipient) hits.push_back(Category::MissingRecipient);
    v.category = hits.empty() ? Category::Balanced : hits.front();
    redeemed.insert(*hit);
    out.push_back(v);
  }
  return out;
}

inline std::vector<Verdict> actual(const AuditReport& r) {
  std::vector<Verdict> out;
  for (const auto& f : r.findings) {
    out.push_back({f.withdrawal.tx_hash, f.category,
                   f.deposit ? std::optional<std::string>(f.deposit->tx_hash) : std::nullopt});
  }
  return out;
}

/// Small alphabets: 2 chains, times 0..3, amounts {0, 5, 10, 11}.
inline Trace random_trace(std::mt19937_64& rng, std::size_t max_deps, std::size_t max_wds) {
  auto pick = [&](std::uint64_t n) { return static_cast<std::uint64_t>(rng() % n); };
  static const std::uint64_t kAmounts[] = {0, 5, 10, 11};
  Trace tr;
  tr.fee = static_cast<Fee>(pick(3));
  const std::size_t nd = pick(max_deps + 1);
  const std::size_t nw = pick(max_wds + 1);
  std::vector<std::uint64_t> ids = {1, 2, 3, 4, 5, 6, 7, 8};
  for (std::size_t i = 0; i < nd; ++i) {
    Dep d;
    d.chain = pick(2) ? "eth" : "bsc";
    d.t = static_cast<std::int64_t>(pick(4));
    // Mostly distinct ids; an occasional duplicate exercises bridge failure.
    d.id = pick(16) == 0 ? 1 : ids[i];
    d.amount = kAmounts[pick(4)];
    d.dest_other = pick(8) != 0;
    d.has_recipient = pick(8) != 0;
    tr.deps.push_back(d);
  }
  for (std::size_t j = 0; j < nw; ++j) {
    Wd w;
    w.chain = pick(2) ? "eth" : "bsc";
    w.t = static_cast<std::int64_t>(pick(4));
    w.handle = static_cast<Handle>(pick(8) == 0 ? 0 : 1 + pick(2));
    w.key = w.handle == Handle::Id ? 1 + pick(nd + 1) : pick(nd + 1);
    w.amount = kAmounts[pick(4)];
    w.right_token = pick(10) != 0;
    tr.wds.push_back(w);
  }
  return tr;
}

}  // namespace oracle

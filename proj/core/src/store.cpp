#include "bridgeaudit/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <unistd.h>

#include "bridgeaudit/codec.hpp"

namespace bridgeaudit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDep = "dep/";
constexpr std::string_view kRed = "red/";
constexpr std::string_view kFnd = "fnd/";
constexpr std::string_view kAlr = "alr/";

json record_to_json(const StoreRecord& r) {
  return {{"key", r.key},
          {"tier", r.tier == Tier::Hot ? "hot" : "cold"},
          {"written_at", r.written_at},
          {"payload", r.payload}};
}

StoreRecord record_from_json(const json& j) {
  StoreRecord r;
  r.key = j.at("key").get<std::string>();
  r.tier = j.at("tier").get<std::string>() == "cold" ? Tier::Cold : Tier::Hot;
  r.written_at = j.at("written_at").get<UnixTime>();
  r.payload = j.at("payload");
  return r;
}

std::string frame(const StoreRecord& r) {
  const std::string body = record_to_json(r).dump();
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out(4, '\0');
  for (int i = 0; i < 4; ++i) out[i] = static_cast<char>((n >> (8 * i)) & 0xff);
  out += body;
  return out;
}

/// Reads complete frames; stops at the first torn or corrupt one and
/// returns the byte offset just past the last good frame.
std::size_t read_frames(const fs::path& path, std::vector<StoreRecord>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (data.size() - pos >= 4) {
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) {
      n |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    if (data.size() - pos - 4 < n) break;
    try {
      out.push_back(record_from_json(json::parse(data.substr(pos + 4, n))));
    } catch (const json::exception&) {
      break;
    }
    pos += 4 + n;
  }
  return pos;
}

std::FILE* open_append(const fs::path& p) {
  std::FILE* f = std::fopen(p.c_str(), "ab");
  if (!f) throw StoreError("cannot open " + p.string() + ": " + std::strerror(errno));
  return f;
}

void write_all(std::FILE* f, const std::string& bytes, bool sync) {
  if (std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size() || std::fflush(f) != 0) {
    throw StoreError(std::string("store write failed: ") + std::strerror(errno));
  }
  if (sync && ::fsync(::fileno(f)) != 0) {
    throw StoreError(std::string("fsync failed: ") + std::strerror(errno));
  }
}

void replace_file(const fs::path& target, const std::string& bytes, bool sync) {
  const fs::path tmp = target.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw StoreError("cannot write " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_all(f, bytes, sync);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  fs::rename(tmp, target);
}

}  // namespace

std::string deposit_key(const TxRef& ref) { return std::string(kDep) + ref.to_string(); }
std::string redemption_key(const TxRef& deposit) { return std::string(kRed) + deposit.to_string(); }

json to_json(const Checkpoint& c) {
  json j;
  j["chains"] = json::object();
  for (const auto& [name, cur] : c.chains) {
    j["chains"][name] = {{"block", cur.block}, {"block_time", cur.block_time}};
  }
  j["ledger_digest"] = c.ledger_digest;
  j["horizon"] = c.horizon ? json(*c.horizon) : json(nullptr);
  j["next_batch_id"] = c.next_batch_id;
  j["pending"] = c.pending;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  for (const auto& [name, cur] : j.at("chains").items()) {
    c.chains[name] = {cur.at("block").get<std::uint64_t>(), cur.at("block_time").get<UnixTime>()};
  }
  c.ledger_digest = j.value("ledger_digest", "");
  if (j.contains("horizon") && !j.at("horizon").is_null()) c.horizon = j.at("horizon").get<UnixTime>();
  c.next_batch_id = j.value("next_batch_id", std::uint64_t{1});
  c.pending = j.value("pending", json::array());
  return c;
}

std::optional<ChainEvent> Store::get_deposit(const TxRef& ref) const {
  auto r = get_deposit_record(ref);
  if (!r) return std::nullopt;
  return std::move(r->event);
}

FileStore::FileStore(fs::path dir) : FileStore(std::move(dir), Options{}) {}

FileStore::FileStore(fs::path dir, Options options) : dir_(std::move(dir)), options_(options) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StoreError("cannot create store dir " + dir_.string() + ": " + ec.message());
  load();
}

FileStore::~FileStore() {
  if (hot_file_) std::fclose(hot_file_);
  if (cold_file_) std::fclose(cold_file_);
}

void FileStore::load() {
  std::unique_lock lock(mu_);
  const fs::path hot = dir_ / "hot.log";
  const fs::path cold = dir_ / "cold.log";

  std::vector<StoreRecord> recs;
  const std::size_t cold_ok = read_frames(cold, recs);
  if (fs::exists(cold) && fs::file_size(cold) != cold_ok) fs::resize_file(cold, cold_ok);
  for (auto& r : recs) {
    r.tier = Tier::Cold;
    cold_.insert_or_assign(r.key, std::move(r));
  }

  recs.clear();
  const std::size_t hot_ok = read_frames(hot, recs);
  if (fs::exists(hot) && fs::file_size(hot) != hot_ok) fs::resize_file(hot, hot_ok);
  bool migrated_twice = false;
  for (auto& r : recs) {
    // A crash between the cold append and the hot rewrite leaves a copy
    // in both logs; cold wins and hot is rewritten below.
    if (cold_.count(r.key)) {
      migrated_twice = true;
      continue;
    }
    r.tier = Tier::Hot;
    hot_.insert_or_assign(r.key, std::move(r));
  }
  if (migrated_twice) rewrite_hot_locked();

  if (!hot_file_) hot_file_ = open_append(hot);
  cold_file_ = open_append(cold);
}

const StoreRecord* FileStore::find_locked(std::string_view key) const {
  if (auto it = hot_.find(key); it != hot_.end()) return &it->second;
  if (auto it = cold_.find(key); it != cold_.end()) return &it->second;
  return nullptr;
}

void FileStore::append_locked(std::FILE* f, const StoreRecord& r) {
  write_all(f, frame(r), options_.sync);
}

void FileStore::insert_locked(StoreRecord r) {
  r.tier = Tier::Hot;
  append_locked(hot_file_, r);
  std::string key = r.key;
  hot_.insert_or_assign(std::move(key), std::move(r));
}

void FileStore::rewrite_hot_locked() {
  std::string bytes;
  for (const auto& [_, r] : hot_) bytes += frame(r);
  if (hot_file_) {
    std::fclose(hot_file_);
    hot_file_ = nullptr;
  }
  replace_file(dir_ / "hot.log", bytes, options_.sync);
  hot_file_ = open_append(dir_ / "hot.log");
}

void FileStore::put_deposit(const ChainEvent& deposit, const Resolution& inflow, UnixTime now) {
  std::unique_lock lock(mu_);
  const std::string key = deposit_key(deposit.ref);
  if (find_locked(key)) return;
  insert_locked({key, {{"event", to_json(deposit)}, {"inflow", to_json(inflow)}}, Tier::Hot, now});
}

namespace {

StoredDeposit decode_deposit(const StoreRecord& r) {
  auto parsed = parse_event_line(r.payload.at("event").dump(), 0);
  if (auto* err = std::get_if<ParseError>(&parsed)) {
    throw StoreError("corrupt deposit record " + r.key + ": " + err->reason);
  }
  return {std::get<ChainEvent>(std::move(parsed)), resolution_from_json(r.payload.at("inflow")),
          r.tier};
}

}  // namespace

std::optional<StoredDeposit> FileStore::get_deposit_record(const TxRef& ref) const {
  std::shared_lock lock(mu_);
  const StoreRecord* r = find_locked(deposit_key(ref));
  if (!r) return std::nullopt;
  return decode_deposit(*r);
}

void FileStore::for_each_deposit(const std::function<void(const StoredDeposit&)>& fn) const {
  std::vector<StoredDeposit> all;
  {
    std::shared_lock lock(mu_);
    for (const Table* t : {&cold_, &hot_}) {
      for (auto it = t->lower_bound(kDep); it != t->end() && it->first.starts_with(kDep); ++it) {
        all.push_back(decode_deposit(it->second));
      }
    }
  }
  std::sort(all.begin(), all.end(), [](const StoredDeposit& a, const StoredDeposit& b) {
    return event_order_less(a.event, b.event);
  });
  for (const auto& d : all) fn(d);
}

std::optional<TxRef> FileStore::redeemer(const TxRef& deposit) const {
  std::shared_lock lock(mu_);
  const StoreRecord* r = find_locked(redemption_key(deposit));
  if (!r) return std::nullopt;
  return txref_from_json(r->payload.at("withdrawal"));
}

std::optional<TxRef> FileStore::mark_redeemed(const TxRef& deposit, const TxRef& withdrawal) {
  std::unique_lock lock(mu_);
  const std::string key = redemption_key(deposit);
  if (const StoreRecord* r = find_locked(key)) return txref_from_json(r->payload.at("withdrawal"));
  insert_locked({key, {{"deposit", to_json(deposit)}, {"withdrawal", to_json(withdrawal)}}, Tier::Hot,
                 now_});
  return std::nullopt;
}

void FileStore::put_finding(const Finding& f, bool alert, UnixTime now) {
  std::unique_lock lock(mu_);
  const std::string key = std::string(kFnd) + f.id();
  if (find_locked(key)) return;
  insert_locked({key, {{"finding", to_json(f)}, {"alert", alert}}, Tier::Hot, now});
}

bool FileStore::has_finding(const std::string& id) const {
  std::shared_lock lock(mu_);
  return find_locked(std::string(kFnd) + id) != nullptr;
}

void FileStore::mark_alerted(const std::string& finding_id, std::uint64_t batch_id, UnixTime now) {
  std::unique_lock lock(mu_);
  const std::string key = std::string(kAlr) + finding_id;
  if (find_locked(key)) return;
  insert_locked({key, {{"batch_id", batch_id}}, Tier::Hot, now});
}

bool FileStore::alerted(const std::string& finding_id) const {
  std::shared_lock lock(mu_);
  return find_locked(std::string(kAlr) + finding_id) != nullptr;
}

std::vector<Finding> FileStore::unalerted_findings() const {
  std::vector<Finding> out;
  std::shared_lock lock(mu_);
  for (const Table* t : {&cold_, &hot_}) {
    for (auto it = t->lower_bound(kFnd); it != t->end() && it->first.starts_with(kFnd); ++it) {
      if (!it->second.payload.value("alert", false)) continue;
      const std::string id = it->first.substr(kFnd.size());
      if (find_locked(std::string(kAlr) + id)) continue;
      out.push_back(finding_from_json(it->second.payload.at("finding")));
    }
  }
  std::sort(out.begin(), out.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.block_time, a.withdrawal, a.category) <
           std::tie(b.block_time, b.withdrawal, b.category);
  });
  return out;
}

std::size_t FileStore::evict_to_cold(UnixTime now, std::int64_t hot_window) {
  if (hot_window <= 0) throw std::invalid_argument("evict_to_cold: hot_window must be > 0");
  std::unique_lock lock(mu_);
  std::vector<std::string> moving;
  std::string bytes;
  for (const auto& [key, r] : hot_) {
    if (r.written_at < now - hot_window) {
      moving.push_back(key);
      StoreRecord c = r;
      c.tier = Tier::Cold;
      bytes += frame(c);
    }
  }
  if (moving.empty()) return 0;
  // Cold copy becomes durable first, so every key stays readable from
  // at least one tier whatever happens next.
  write_all(cold_file_, bytes, options_.sync);
  for (const auto& key : moving) {
    auto node = hot_.extract(key);
    node.mapped().tier = Tier::Cold;
    cold_.insert(std::move(node));
  }
  rewrite_hot_locked();
  return moving.size();
}

std::optional<Checkpoint> FileStore::load_checkpoint() const {
  std::shared_lock lock(mu_);
  std::ifstream in(dir_ / "checkpoint.json");
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw StoreError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void FileStore::save_checkpoint(const Checkpoint& c) {
  std::unique_lock lock(mu_);
  replace_file(dir_ / "checkpoint.json", to_json(c).dump(), options_.sync);
}

std::map<TxRef, TxRef> FileStore::ledger_entries() const {
  std::map<TxRef, TxRef> out;
  std::shared_lock lock(mu_);
  for (const Table* t : {&cold_, &hot_}) {
    for (auto it = t->lower_bound(kRed); it != t->end() && it->first.starts_with(kRed); ++it) {
      out.emplace(txref_from_json(it->second.payload.at("deposit")),
                  txref_from_json(it->second.payload.at("withdrawal")));
    }
  }
  return out;
}

std::size_t FileStore::hot_size() const {
  std::shared_lock lock(mu_);
  return hot_.size();
}

std::size_t FileStore::cold_size() const {
  std::shared_lock lock(mu_);
  return cold_.size();
}

std::optional<Tier> FileStore::tier_of(const std::string& key) const {
  std::shared_lock lock(mu_);
  const StoreRecord* r = find_locked(key);
  if (!r) return std::nullopt;
  return r->tier;
}

}  // namespace bridgeaudit

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Tier { Hot, Cold };

struct StoreRecord {
  std::string key;
  nlohmann::json payload;
  Tier tier = Tier::Hot;
  UnixTime written_at = 0;
};

struct StoredDeposit {
  ChainEvent event;
  Resolution inflow;
  Tier tier = Tier::Hot;
};

struct ChainCursor {
  std::uint64_t block = 0;
  UnixTime block_time = 0;
  friend bool operator==(const ChainCursor&, const ChainCursor&) = default;
};

/// Restart point written after each audit batch.
struct Checkpoint {
  std::map<std::string, ChainCursor> chains;  // last processed block per chain
  std::string ledger_digest;
  std::optional<UnixTime> horizon;
  std::uint64_t next_batch_id = 1;
  nlohmann::json pending = nlohmann::json::array();  // deferred withdrawals
};

nlohmann::json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Storage contract of the live auditor. One logical writer; readers may
/// run concurrently. mark_redeemed is an atomic compare-and-set.
class Store : public RedemptionLedger {
 public:
  virtual void put_deposit(const ChainEvent& deposit, const Resolution& inflow, UnixTime now) = 0;
  virtual std::optional<StoredDeposit> get_deposit_record(const TxRef& ref) const = 0;
  std::optional<ChainEvent> get_deposit(const TxRef& ref) const;
  virtual void for_each_deposit(const std::function<void(const StoredDeposit&)>& fn) const = 0;

  virtual void put_finding(const Finding& f, bool alert, UnixTime now) = 0;
  virtual bool has_finding(const std::string& id) const = 0;
  virtual void mark_alerted(const std::string& finding_id, std::uint64_t batch_id, UnixTime now) = 0;
  virtual bool alerted(const std::string& finding_id) const = 0;
  /// Alert-worthy findings without an alert marker, in event order.
  virtual std::vector<Finding> unalerted_findings() const = 0;

  /// Moves hot records older than now - hot_window to cold; returns the count.
  virtual std::size_t evict_to_cold(UnixTime now, std::int64_t hot_window) = 0;

  virtual std::optional<Checkpoint> load_checkpoint() const = 0;
  virtual void save_checkpoint(const Checkpoint& c) = 0;
  virtual std::map<TxRef, TxRef> ledger_entries() const = 0;

  /// Clock used to stamp redemption records (they carry no caller time).
  virtual void set_now(UnixTime) {}
};

/// Embedded store: `hot.log` and `cold.log` hold length-prefixed JSON
/// StoreRecords; `checkpoint.json` is replaced atomically.
class FileStore final : public Store {
 public:
  struct Options {
    bool sync = true;  // fsync after every append
  };

  explicit FileStore(std::filesystem::path dir);
  FileStore(std::filesystem::path dir, Options options);
  ~FileStore() override;
  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

  void put_deposit(const ChainEvent& deposit, const Resolution& inflow, UnixTime now) override;
  std::optional<StoredDeposit> get_deposit_record(const TxRef& ref) const override;
  void for_each_deposit(const std::function<void(const StoredDeposit&)>& fn) const override;

  std::optional<TxRef> redeemer(const TxRef& deposit) const override;
  std::optional<TxRef> mark_redeemed(const TxRef& deposit, const TxRef& withdrawal) override;

  void put_finding(const Finding& f, bool alert, UnixTime now) override;
  bool has_finding(const std::string& id) const override;
  void mark_alerted(const std::string& finding_id, std::uint64_t batch_id, UnixTime now) override;
  bool alerted(const std::string& finding_id) const override;
  std::vector<Finding> unalerted_findings() const override;

  std::size_t evict_to_cold(UnixTime now, std::int64_t hot_window) override;

  std::optional<Checkpoint> load_checkpoint() const override;
  void save_checkpoint(const Checkpoint& c) override;
  std::map<TxRef, TxRef> ledger_entries() const override;

  void set_now(UnixTime now) override { now_ = now; }

  std::size_t hot_size() const;
  std::size_t cold_size() const;
  std::optional<Tier> tier_of(const std::string& key) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  using Table = std::map<std::string, StoreRecord, std::less<>>;

  const StoreRecord* find_locked(std::string_view key) const;
  void append_locked(std::FILE* f, const StoreRecord& r);
  void insert_locked(StoreRecord r);
  void load();
  void rewrite_hot_locked();

  std::filesystem::path dir_;
  Options options_;
  mutable std::shared_mutex mu_;
  Table hot_;
  Table cold_;
  std::FILE* hot_file_ = nullptr;
  std::FILE* cold_file_ = nullptr;
  UnixTime now_ = 0;
};

/// Store key helpers.
std::string deposit_key(const TxRef& ref);
std::string redemption_key(const TxRef& deposit);

}  // namespace bridgeaudit

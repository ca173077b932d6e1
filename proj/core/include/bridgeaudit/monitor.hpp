#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"
#include "bridgeaudit/store.hpp"

namespace bridgeaudit {

struct SourceBatch {
  std::vector<ChainEvent> events;  // in file/block order
  UnixTime finalized_head_time = 0;
};

/// Provider of finalized blocks for one chain. Batches are in order,
/// never overlap, and hold only blocks older than the finality lag.
class ChainSource {
 public:
  virtual ~ChainSource() = default;
  virtual const ChainInfo& chain() const = 0;
  virtual SourceBatch next_finalized_batch(UnixTime now) = 0;
  /// Drops everything at or before the cursor (used after a restart).
  virtual void resume_after(const ChainCursor& cursor) = 0;
};

/// In-memory event list for one chain, e.g. a simchain trace.
class TraceSource final : public ChainSource {
 public:
  TraceSource(ChainInfo chain, std::vector<ChainEvent> events);

  const ChainInfo& chain() const override { return chain_; }
  SourceBatch next_finalized_batch(UnixTime now) override;
  void resume_after(const ChainCursor& cursor) override;

 private:
  ChainInfo chain_;
  std::vector<ChainEvent> events_;
  std::size_t next_ = 0;
};

/// Tails a newline-delimited event log that another process appends to.
/// Only complete lines are read; malformed ones are logged and skipped.
class FileTailSource final : public ChainSource {
 public:
  FileTailSource(ChainInfo chain, std::filesystem::path path);

  const ChainInfo& chain() const override { return chain_; }
  SourceBatch next_finalized_batch(UnixTime now) override;
  void resume_after(const ChainCursor& cursor) override;

 private:
  void read_new_lines();

  ChainInfo chain_;
  std::filesystem::path path_;
  std::uintmax_t offset_ = 0;
  std::size_t line_no_ = 0;
  std::vector<ChainEvent> buffered_;
  std::optional<ChainCursor> skip_through_;
};

struct Alert {
  Finding finding;
  std::uint64_t batch_id = 0;
  UnixTime emitted_at = 0;
};

nlohmann::json to_json(const Alert& a);

class AlertSink {
 public:
  virtual ~AlertSink() = default;
  virtual void emit(const Alert& alert) = 0;
};

/// Appends one JSON alert record per line.
class JsonlAlertSink final : public AlertSink {
 public:
  explicit JsonlAlertSink(std::filesystem::path path);
  void emit(const Alert& alert) override;

 private:
  std::filesystem::path path_;
};

/// Writes one HTTP-POST-shaped request file per alert into an outbox
/// directory for a delivery agent to pick up.
class WebhookOutboxSink final : public AlertSink {
 public:
  WebhookOutboxSink(std::filesystem::path outbox, std::string url);
  void emit(const Alert& alert) override;

 private:
  std::filesystem::path outbox_;
  std::string url_;
};

class MemoryAlertSink final : public AlertSink {
 public:
  void emit(const Alert& alert) override;
  std::vector<Alert> alerts() const;

 private:
  mutable std::mutex mu_;
  std::vector<Alert> alerts_;
};

struct MonitorConfig {
  std::int64_t interval = 60;              // seconds between polls
  std::int64_t hot_window = 90 * 86'400;   // hot-tier retention
  bool parallel_fetch = false;             // one fetch task per source
};

struct PollReport {
  std::size_t events_seen = 0;
  std::size_t withdrawals_audited = 0;
  std::size_t alerts_emitted = 0;
  std::size_t deferred = 0;
  std::size_t failed_sources = 0;
  std::optional<UnixTime> horizon;
  std::optional<std::uint64_t> batch_id;
};

/// Thrown by crash hooks in fault-injection tests.
struct SimulatedCrash {
  std::string point;
};

/// Blockchain monitor + auditor over a persistent store. Restores its
/// state from the store checkpoint on construction.
class LiveMonitor {
 public:
  using CrashHook = std::function<void(std::string_view point)>;

  LiveMonitor(const AuditConfig& config, MonitorConfig monitor, std::vector<ChainSource*> sources,
              Store& store, AlertSink& sink, AuditOptions options = {}, ExternalMap external = {});

  /// Ingests newly finalized events, audits withdrawals covered by the
  /// sync horizon, persists, then emits alerts under one batch id.
  PollReport poll_once(UnixTime now);

  std::optional<UnixTime> horizon() const noexcept { return horizon_; }
  std::size_t deferred() const noexcept { return pending_.size(); }
  const MonitorConfig& config() const noexcept { return monitor_; }

  /// Called at named points inside poll_once; may throw to simulate a kill.
  void set_crash_hook(CrashHook hook) { crash_hook_ = std::move(hook); }

 private:
  struct Pending {
    ChainEvent event;
    Resolution outflow;
  };

  void restore();
  void ingest(const ChainSource& src, SourceBatch& batch, UnixTime now);
  bool alert_worthy(const Finding& f) const;
  void save_checkpoint();
  void crash_point(std::string_view name);

  const AuditConfig& config_;
  MonitorConfig monitor_;
  std::vector<ChainSource*> sources_;
  Store& store_;
  AlertSink& sink_;
  AuditEngine engine_;
  std::map<std::string, ChainCursor> cursors_;
  std::map<std::string, UnixTime> heads_;
  std::optional<UnixTime> horizon_;
  std::vector<Pending> pending_;
  std::uint64_t next_batch_id_ = 1;
  CrashHook crash_hook_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual UnixTime now() = 0;
  virtual void sleep_for(std::int64_t seconds) = 0;
};

class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(UnixTime start) : now_(start) {}
  UnixTime now() override { return now_; }
  void sleep_for(std::int64_t seconds) override { now_ += seconds; }

 private:
  UnixTime now_;
};

class SystemClock final : public Clock {
 public:
  UnixTime now() override;
  void sleep_for(std::int64_t seconds) override;
};

/// Polls at the configured interval until `stop` is set or `max_polls`
/// polls have run. Exceptions from a poll are logged and the loop goes on.
/// Returns the number of polls performed.
std::size_t run_monitor(LiveMonitor& monitor, Clock& clock, const std::atomic<bool>& stop,
                        std::optional<std::size_t> max_polls = std::nullopt,
                        const std::function<void(const PollReport&)>& on_poll = {});

}  // namespace bridgeaudit

#include "bridgeaudit/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <thread>

#include <spdlog/spdlog.h>

#include "bridgeaudit/codec.hpp"

namespace bridgeaudit {

using nlohmann::json;

// ---- sources ----

TraceSource::TraceSource(ChainInfo chain, std::vector<ChainEvent> events)
    : chain_(std::move(chain)), events_(std::move(events)) {
  std::stable_sort(events_.begin(), events_.end(), [](const ChainEvent& a, const ChainEvent& b) {
    return std::tie(a.block_time, a.block, a.ref.log_index) <
           std::tie(b.block_time, b.block, b.ref.log_index);
  });
}

SourceBatch TraceSource::next_finalized_batch(UnixTime now) {
  SourceBatch batch;
  batch.finalized_head_time = now - chain_.finality_lag;
  while (next_ < events_.size() && events_[next_].block_time <= batch.finalized_head_time) {
    batch.events.push_back(events_[next_++]);
  }
  return batch;
}

void TraceSource::resume_after(const ChainCursor& cursor) {
  while (next_ < events_.size() && events_[next_].block <= cursor.block &&
         events_[next_].block_time <= cursor.block_time) {
    ++next_;
  }
}

FileTailSource::FileTailSource(ChainInfo chain, std::filesystem::path path)
    : chain_(std::move(chain)), path_(std::move(path)) {}

void FileTailSource::read_new_lines() {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec)) return;  // not created yet
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path_.string());
  in.seekg(static_cast<std::streamoff>(offset_));
  std::string chunk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  for (std::size_t nl = chunk.find('\n'); nl != std::string::npos; nl = chunk.find('\n', start)) {
    const std::string_view line(chunk.data() + start, nl - start);
    ++line_no_;
    start = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto parsed = parse_event_line(line, line_no_);
    if (auto* e = std::get_if<ChainEvent>(&parsed)) {
      if (e->ref.chain != chain_.id) {
        spdlog::warn("{}:{}: record for chain {} ignored", path_.string(), line_no_,
                     e->ref.chain.name());
        continue;
      }
      if (skip_through_ && e->block <= skip_through_->block &&
          e->block_time <= skip_through_->block_time) {
        continue;
      }
      buffered_.push_back(std::move(*e));
    } else {
      spdlog::warn("{}:{}: {}", path_.string(), line_no_, std::get<ParseError>(parsed).reason);
    }
  }
  offset_ += start;  // a partial last line waits for its newline
}

SourceBatch FileTailSource::next_finalized_batch(UnixTime now) {
  read_new_lines();
  SourceBatch batch;
  batch.finalized_head_time = now - chain_.finality_lag;
  auto split = std::stable_partition(buffered_.begin(), buffered_.end(), [&](const ChainEvent& e) {
    return e.block_time <= batch.finalized_head_time;
  });
  batch.events.assign(std::make_move_iterator(buffered_.begin()), std::make_move_iterator(split));
  buffered_.erase(buffered_.begin(), split);
  return batch;
}

void FileTailSource::resume_after(const ChainCursor& cursor) {
  skip_through_ = cursor;
  std::erase_if(buffered_, [&](const ChainEvent& e) {
    return e.block <= cursor.block && e.block_time <= cursor.block_time;
  });
}

// ---- sinks ----

json to_json(const Alert& a) {
  const Finding& f = a.finding;
  auto opt = [](const std::optional<Amount>& v) { return v ? json(v->to_string()) : json(nullptr); };
  return {{"batch_id", a.batch_id},
          {"id", f.id()},
          {"category", std::string(to_string(f.category))},
          {"bridge", f.bridge},
          {"withdrawal", to_json(f.withdrawal)},
          {"deposit", f.deposit ? to_json(*f.deposit) : json(nullptr)},
          {"amounts",
           {{"inflow", opt(f.inflow)}, {"outflow", f.outflow.to_string()},
            {"max_allowed", opt(f.max_allowed)}}},
          {"note", f.note},
          {"emitted_at", a.emitted_at}};
}

JsonlAlertSink::JsonlAlertSink(std::filesystem::path path) : path_(std::move(path)) {}

void JsonlAlertSink::emit(const Alert& alert) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path_.string());
  out << to_json(alert).dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path_.string());
}

WebhookOutboxSink::WebhookOutboxSink(std::filesystem::path outbox, std::string url)
    : outbox_(std::move(outbox)), url_(std::move(url)) {
  std::filesystem::create_directories(outbox_);
}

void WebhookOutboxSink::emit(const Alert& alert) {
  // Name is unique per (batch, finding) so re-delivery overwrites.
  std::string name = std::to_string(alert.batch_id) + "-" + alert.finding.id();
  std::replace_if(name.begin(), name.end(), [](char c) { return c == '/' || c == ':'; }, '_');
  const auto final_path = outbox_ / (name + ".json");
  const auto tmp = outbox_ / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    json req = {{"method", "POST"},
                {"url", url_},
                {"headers", {{"Content-Type", "application/json"}}},
                {"body", to_json(alert)}};
    out << req.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

void MemoryAlertSink::emit(const Alert& alert) {
  std::lock_guard lock(mu_);
  alerts_.push_back(alert);
}

std::vector<Alert> MemoryAlertSink::alerts() const {
  std::lock_guard lock(mu_);
  return alerts_;
}

// ---- monitor ----

LiveMonitor::LiveMonitor(const AuditConfig& config, MonitorConfig monitor,
                         std::vector<ChainSource*> sources, Store& store, AlertSink& sink,
                         AuditOptions options, ExternalMap external)
    : config_(config),
      monitor_(monitor),
      sources_(std::move(sources)),
      store_(store),
      sink_(sink),
      engine_(config, store, options, std::move(external)) {
  restore();
}

void LiveMonitor::restore() {
  store_.for_each_deposit([&](const StoredDeposit& d) {
    try {
      engine_.add_deposit(d.event, d.inflow);
    } catch (const DuplicateDepositKey& e) {
      engine_.mark_failed(d.event.bridge_id, e.what());
    }
  });
  const auto cp = store_.load_checkpoint();
  if (!cp) return;
  cursors_ = cp->chains;
  horizon_ = cp->horizon;
  next_batch_id_ = cp->next_batch_id;
  for (const auto& p : cp->pending) {
    auto parsed = parse_event_line(p.at("event").dump(), 0);
    if (auto* e = std::get_if<ChainEvent>(&parsed)) {
      pending_.push_back({std::move(*e), resolution_from_json(p.at("outflow"))});
    } else {
      throw StoreError("checkpoint holds an unreadable pending withdrawal");
    }
  }
  for (ChainSource* s : sources_) {
    const auto it = cursors_.find(s->chain().id.name());
    if (it != cursors_.end()) s->resume_after(it->second);
  }
  spdlog::info("monitor restored: {} pending, horizon {}", pending_.size(),
               horizon_ ? std::to_string(*horizon_) : "none");
}

void LiveMonitor::crash_point(std::string_view name) {
  if (crash_hook_) crash_hook_(name);
}

void LiveMonitor::ingest(const ChainSource& src, SourceBatch& batch, UnixTime now) {
  TransferIndex transfers;
  for (const auto& e : batch.events) {
    if (e.kind() == EventKind::Transfer) transfers.add(e);
  }
  for (const auto& e : batch.events) {
    if (e.kind() == EventKind::Transfer) continue;
    const BridgeConfig& bridge = config_.bridge(e.bridge_id);
    Resolution r = resolve_amount(e, transfers.in_tx(e.ref), bridge);
    if (e.kind() == EventKind::Deposit) {
      store_.put_deposit(e, r, now);
      crash_point("deposit");
      try {
        engine_.add_deposit(e, std::move(r));
      } catch (const DuplicateDepositKey& ex) {
        spdlog::error("bridge {} disabled: {}", e.bridge_id, ex.what());
        engine_.mark_failed(e.bridge_id, ex.what());
      }
    } else {
      pending_.push_back({e, std::move(r)});
    }
  }
  if (!batch.events.empty()) {
    const auto& last = batch.events.back();
    cursors_[src.chain().id.name()] = ChainCursor{last.block, last.block_time};
  }
}

bool LiveMonitor::alert_worthy(const Finding& f) const {
  if (is_violation(f.category)) return true;
  if (config_.alert_on_unknown_token && f.token &&
      !config_.bridge(f.bridge).is_known_token(*f.token)) {
    return true;
  }
  return false;
}

void LiveMonitor::save_checkpoint() {
  Checkpoint cp;
  cp.chains = cursors_;
  cp.horizon = horizon_;
  cp.next_batch_id = next_batch_id_;
  cp.ledger_digest = ledger_digest(store_.ledger_entries());
  for (const auto& p : pending_) {
    cp.pending.push_back({{"event", to_json(p.event)}, {"outflow", to_json(p.outflow)}});
  }
  store_.save_checkpoint(cp);
}

PollReport LiveMonitor::poll_once(UnixTime now) {
  PollReport report;
  store_.set_now(now);

  // Fetch. Results are consumed in source order whichever way they ran.
  std::vector<std::optional<SourceBatch>> batches(sources_.size());
  auto fetch = [&](std::size_t i) -> std::optional<SourceBatch> {
    try {
      return sources_[i]->next_finalized_batch(now);
    } catch (const std::exception& e) {
      spdlog::warn("source {} failed: {}", sources_[i]->chain().id.name(), e.what());
      return std::nullopt;
    }
  };
  if (monitor_.parallel_fetch && sources_.size() > 1) {
    std::vector<std::future<std::optional<SourceBatch>>> futures;
    futures.reserve(sources_.size());
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      futures.push_back(std::async(std::launch::async, fetch, i));
    }
    for (std::size_t i = 0; i < sources_.size(); ++i) batches[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < sources_.size(); ++i) batches[i] = fetch(i);
  }

  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (!batches[i]) {
      ++report.failed_sources;
      continue;
    }
    report.events_seen += batches[i]->events.size();
    heads_[sources_[i]->chain().id.name()] = batches[i]->finalized_head_time;
    ingest(*sources_[i], *batches[i], now);
  }

  // A chain that never answered holds the horizon back.
  if (!sources_.empty() && heads_.size() == sources_.size()) {
    UnixTime h = heads_.begin()->second;
    for (const auto& [_, t] : heads_) h = std::min(h, t);
    horizon_ = horizon_ ? std::max(*horizon_, h) : h;
  }
  report.horizon = horizon_;

  std::stable_sort(pending_.begin(), pending_.end(), [](const Pending& a, const Pending& b) {
    return event_order_less(a.event, b.event);
  });
  std::vector<Pending> still;
  for (auto& p : pending_) {
    if (!horizon_ || p.event.block_time > *horizon_) {
      still.push_back(std::move(p));
      continue;
    }
    if (engine_.failed(p.event.bridge_id)) continue;
    const Finding f = engine_.audit(p.event, p.outflow);
    store_.put_finding(f, alert_worthy(f), now);
    ++report.withdrawals_audited;
    crash_point("finding");
  }
  pending_ = std::move(still);
  report.deferred = pending_.size();

  save_checkpoint();
  crash_point("checkpoint");

  // Alerts after the checkpoint; store markers make re-delivery idempotent.
  const auto unalerted = store_.unalerted_findings();
  if (!unalerted.empty()) {
    const std::uint64_t batch_id = next_batch_id_++;
    report.batch_id = batch_id;
    for (const auto& f : unalerted) {
      sink_.emit(Alert{f, batch_id, now});
      crash_point("emit");
      store_.mark_alerted(f.id(), batch_id, now);
      ++report.alerts_emitted;
    }
    save_checkpoint();
  }

  store_.evict_to_cold(now, monitor_.hot_window);
  return report;
}

// ---- loop ----

UnixTime SystemClock::now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void SystemClock::sleep_for(std::int64_t seconds) {
  std::this_thread::sleep_for(std::chrono::seconds(seconds));
}

std::size_t run_monitor(LiveMonitor& monitor, Clock& clock, const std::atomic<bool>& stop,
                        std::optional<std::size_t> max_polls,
                        const std::function<void(const PollReport&)>& on_poll) {
  std::size_t polls = 0;
  while (!stop.load() && (!max_polls || polls < *max_polls)) {
    try {
      const PollReport r = monitor.poll_once(clock.now());
      spdlog::info("poll: {} events, {} audited, {} alerts, {} deferred", r.events_seen,
                   r.withdrawals_audited, r.alerts_emitted, r.deferred);
      if (on_poll) on_poll(r);
    } catch (const std::exception& e) {
      spdlog::error("poll failed: {}", e.what());
    }
    ++polls;
    if (stop.load() || (max_polls && polls >= *max_polls)) break;
    clock.sleep_for(monitor.config().interval);
  }
  return polls;
}

}  // namespace bridgeaudit

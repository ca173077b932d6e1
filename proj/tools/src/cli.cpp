#include "bridgeaudit/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "bridgeaudit/ate.hpp"
#include "bridgeaudit/codec.hpp"
#include "bridgeaudit/digest.hpp"
#include "bridgeaudit/monitor.hpp"
#include "bridgeaudit/simchain.hpp"
#include "bridgeaudit/store.hpp"

namespace bridgeaudit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- report ----

ReportRules parse_rules(const json& j) {
  ReportRules r;
  try {
    auto strings = [&](const char* key, std::set<std::string>& into, bool lower) {
      if (!j.contains(key)) return;
      for (const auto& v : j.at(key)) into.insert(lower ? to_lower(v.get<std::string>()) : v.get<std::string>());
    };
    strings("suspicious_addresses", r.suspicious_addresses, true);
    strings("new_txs", r.new_txs, true);
    strings("new_addresses", r.new_addresses, true);
    if (j.contains("test_tokens")) {
      for (const auto& v : j.at("test_tokens")) {
        auto t = parse_token_key(v.get<std::string>());
        if (!t) throw ConfigError("rules: bad token key " + v.get<std::string>());
        r.test_tokens.insert(*t);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rules: ") + e.what());
  }
  return r;
}

namespace {

bool is_attack(Category c) {
  return c == Category::UnbackedWithdrawal || c == Category::DoubleSpend ||
         c == Category::AmountExceedsInflow;
}

void tally(ReportRow& row, const Finding& f, const ReportRules& rules) {
  ++row.analyzed;
  ++row.categories[f.category];
  const std::string recipient = to_lower(f.recipient);
  const bool test = f.category == Category::TestToken || f.test_token ||
                    (f.token && rules.test_tokens.count(*f.token));
  if (test) {
    ++row.test;
  } else if (is_attack(f.category)) {
    ++row.reported;
  } else if (is_violation(f.category)) {
    ++row.error;
  }
  if (!is_violation(f.category) && !test) return;
  if (rules.suspicious_addresses.count(recipient)) ++row.suspicious;
  if (rules.new_txs.count(to_lower(f.withdrawal.tx_hash)) || rules.new_addresses.count(recipient)) {
    ++row.new_;
  }
}

json row_json(const ReportRow& r) {
  json cats = json::object();
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const auto c = static_cast<Category>(i);
    const auto it = r.categories.find(c);
    cats[std::string(to_string(c))] = it == r.categories.end() ? 0 : it->second;
  }
  return {{"analyzed", r.analyzed}, {"reported", r.reported}, {"new", r.new_},
          {"test", r.test},         {"error", r.error},       {"suspicious", r.suspicious},
          {"categories", cats}};
}

}  // namespace

Report build_report(std::span<const Finding> findings, const ReportRules& rules) {
  Report r;
  for (const auto& f : findings) {
    tally(r.per_bridge[f.bridge], f, rules);
    tally(r.total, f, rules);
  }
  return r;
}

json to_json(const Report& r) {
  json j;
  j["per_bridge"] = json::object();
  for (const auto& [b, row] : r.per_bridge) j["per_bridge"][b] = row_json(row);
  j["total"] = row_json(r.total);
  return j;
}

std::string report_table(const Report& r) {
  std::ostringstream os;
  auto line = [&](const std::string& name, const ReportRow& row) {
    os << std::left << std::setw(18) << name << std::right << std::setw(10) << row.analyzed
       << std::setw(10) << row.reported << std::setw(6) << row.new_ << std::setw(6) << row.test
       << std::setw(7) << row.error << std::setw(12) << row.suspicious << '\n';
  };
  os << std::left << std::setw(18) << "Bridge" << std::right << std::setw(10) << "Analyzed"
     << std::setw(10) << "Reported" << std::setw(6) << "New" << std::setw(6) << "Test"
     << std::setw(7) << "Error" << std::setw(12) << "Suspicious" << '\n';
  for (const auto& [b, row] : r.per_bridge) line(b, row);
  line("Total", r.total);
  return os.str();
}

// ---- commands ----

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Io {
  std::ostream& out;
  std::ostream& err;
};

std::vector<Finding> read_findings(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Finding> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(finding_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw CodecError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

ExternalMap load_maps(const AuditConfig& cfg) {
  ExternalMap all;
  for (const auto& p : cfg.external_maps) all.merge(load_external_map(p));
  return all;
}

int cmd_audit(const Io& io, const fs::path& config_path, const std::vector<fs::path>& logs,
              const std::optional<fs::path>& out_path, bool strict, const std::optional<fs::path>& flow,
              std::int64_t bucket) {
  AuditConfig cfg = load_audit_config(config_path);
  if (strict) cfg.strict_fees = true;
  const ExternalMap external = load_maps(cfg);

  std::vector<ChainEvent> events;
  std::vector<ParseError> undecodable;
  for (const auto& p : logs) {
    std::ifstream in(p);
    if (!in) {
      io.err << "error: cannot read " << p.string() << '\n';
      return kOperational;
    }
    ParseResult r = parse_event_log(in);
    for (auto& e : r.errors) {
      io.err << p.string() << ":" << e.line << ": " << e.reason << '\n';
      if (e.record) undecodable.push_back(std::move(e));
    }
    std::move(r.events.begin(), r.events.end(), std::back_inserter(events));
  }

  AuditOptions opts;
  opts.strict_fees = cfg.strict_fees;
  const AuditReport report = audit_trace(events, cfg, opts, external, undecodable);

  if (out_path) {
    std::ofstream out(*out_path, std::ios::trunc);
    if (!out) {
      io.err << "error: cannot write " << out_path->string() << '\n';
      return kOperational;
    }
    for (const auto& f : report.findings) out << to_json(f).dump() << '\n';
    std::ofstream summary(out_path->string() + ".summary.json", std::ios::trunc);
    summary << to_json(report.summary).dump(2) << '\n';
  }
  if (flow) {
    std::ofstream out(*flow, std::ios::trunc);
    for (const auto& s : aggregate_flow(events, bucket, cfg)) out << to_json(s).dump() << '\n';
  }
  io.out << summary_table(report.summary);

  if (report.summary.violations() > 0) return kViolations;
  return report.summary.errors.empty() ? kClean : kOperational;
}

struct WatchArgs {
  fs::path config;
  fs::path store;
  std::vector<std::string> sources;  // chain=path
  std::optional<fs::path> feed;      // generated trace directory, simulated time
  std::optional<fs::path> alerts;
  std::optional<fs::path> outbox;
  std::string url = "http://localhost/alerts";
  std::int64_t interval = 60;
  std::optional<std::size_t> polls;
  bool parallel = false;
};

int cmd_watch(const Io& io, const WatchArgs& a) {
  AuditConfig cfg = load_audit_config(a.config);
  const ExternalMap external = load_maps(cfg);

  std::vector<std::unique_ptr<ChainSource>> owned;
  std::optional<UnixTime> first_time;
  if (a.feed) {
    for (const auto& chain : cfg.chains) {
      const fs::path p = *a.feed / (chain.id.name() + ".jsonl");
      std::ifstream in(p);
      ParseResult r = parse_event_log(in, chain.id);
      for (const auto& e : r.errors) io.err << p.string() << ":" << e.line << ": " << e.reason << '\n';
      if (!r.events.empty()) {
        const UnixTime t = r.events.front().block_time;
        first_time = first_time ? std::min(*first_time, t) : t;
      }
      owned.push_back(std::make_unique<TraceSource>(chain, std::move(r.events)));
    }
  }
  for (const auto& s : a.sources) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      io.err << "error: --source expects chain=path\n";
      return kOperational;
    }
    const auto info = cfg.chain(ChainId(s.substr(0, eq)));
    if (!info) {
      io.err << "error: chain " << s.substr(0, eq) << " is not configured\n";
      return kOperational;
    }
    owned.push_back(std::make_unique<FileTailSource>(*info, s.substr(eq + 1)));
  }
  if (owned.empty()) {
    io.err << "error: no sources (use --source or --feed)\n";
    return kOperational;
  }
  std::vector<ChainSource*> sources;
  for (auto& s : owned) sources.push_back(s.get());

  std::unique_ptr<AlertSink> sink;
  if (a.outbox) {
    sink = std::make_unique<WebhookOutboxSink>(*a.outbox, a.url);
  } else {
    sink = std::make_unique<JsonlAlertSink>(a.alerts.value_or(a.store / "alerts.jsonl"));
  }
  FileStore store(a.store);
  MonitorConfig mc;
  mc.interval = a.interval;
  mc.parallel_fetch = a.parallel;
  AuditOptions opts;
  opts.strict_fees = cfg.strict_fees;
  LiveMonitor monitor(cfg, mc, sources, store, *sink, opts, external);

  std::unique_ptr<Clock> clock;
  if (a.feed) {
    clock = std::make_unique<SimulatedClock>(first_time.value_or(0));
  } else {
    clock = std::make_unique<SystemClock>();
  }
  g_stop.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::size_t batches = 0;
  std::size_t alerts = 0;
  const std::size_t polls = run_monitor(monitor, *clock, g_stop, a.polls, [&](const PollReport& r) {
    if (r.batch_id) ++batches;
    alerts += r.alerts_emitted;
  });
  io.out << "polls " << polls << ", alert batches " << batches << ", alerts " << alerts
         << ", deferred " << monitor.deferred() << '\n';
  return kClean;
}

int cmd_simulate(const Io& io, const fs::path& scenario, const fs::path& out_dir) {
  const sim::ScenarioConfig sc = sim::load_scenario(scenario);
  const sim::GeneratedTrace trace = sim::generate(sc);
  sim::write_trace(trace, out_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(out_dir)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    io.out << sha256_hex(buf.str()) << "  " << f.filename().string() << '\n';
  }
  io.out << "benign withdrawals " << trace.benign_withdrawals << ", pending deposits "
         << trace.pending_deposits << ", attacks " << trace.truth.size() << '\n';
  return kClean;
}

int cmd_report(const Io& io, const fs::path& findings, const std::optional<fs::path>& rules_path,
               const std::optional<fs::path>& out_path) {
  ReportRules rules;
  if (rules_path) {
    std::ifstream in(*rules_path);
    if (!in) throw ConfigError("cannot read rules " + rules_path->string());
    try {
      rules = parse_rules(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError(rules_path->string() + ": " + e.what());
    }
  }
  const auto all = read_findings(findings);
  const Report r = build_report(all, rules);
  io.out << report_table(r);
  const std::string j = to_json(r).dump(2);
  if (out_path) {
    std::ofstream(*out_path, std::ios::trunc) << j << '\n';
  } else {
    io.out << j << '\n';
  }
  return kClean;
}

int cmd_ate_demo(const Io& io, std::uint64_t seed, std::size_t seeds, bool benign_only,
                 const std::optional<fs::path>& transcript) {
  ate::ExperimentOptions opts;
  if (benign_only) opts.malicious.clear();
  std::ofstream tr;
  if (transcript) tr.open(*transcript, std::ios::trunc);
  json runs = json::array();
  for (std::size_t i = 0; i < seeds; ++i) {
    const ate::ExperimentReport r = ate::run_correctness_experiment(seed + i, opts);
    if (tr.is_open()) {
      for (const auto& o : r.outcomes) {
        tr << json{{"seed", r.seed}, {"position", o.position}, {"kind", ate::to_string(o.kind)},
                   {"ticket", o.ticket}}
                  .dump()
           << '\n';
      }
    }
    json j = ate::to_json(r);
    j.erase("outcomes");  // kept in the transcript
    runs.push_back(std::move(j));
  }
  io.out << (seeds == 1 ? runs.front() : runs).dump(2) << '\n';
  return kClean;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Io io{out, err};
  CLI::App app{"Cross-chain bridge accounting auditor", "bridge-audit"};
  app.require_subcommand(1);

  fs::path config;
  std::optional<fs::path> out_path;
  bool strict = false;

  auto* audit = app.add_subcommand("audit", "Audit event logs against the balance invariant");
  std::vector<fs::path> logs;
  std::optional<fs::path> flow;
  std::int64_t bucket = 3600;
  audit->add_option("--config", config, "Audit config (JSON)")->required();
  audit->add_option("--out", out_path, "Findings output (newline-delimited JSON)");
  audit->add_flag("--strict-fees", strict, "Require outflow to equal inflow minus fee");
  audit->add_option("--flow-out", flow, "Write cumulative flow series here");
  audit->add_option("--bucket", bucket, "Flow bucket width in seconds")->check(CLI::PositiveNumber);
  audit->add_option("logs", logs, "Event log files")->required();

  auto* watch = app.add_subcommand("watch", "Poll chains and alert on violations");
  WatchArgs wa;
  watch->add_option("--config", wa.config)->required();
  watch->add_option("--store", wa.store, "State directory")->required();
  watch->add_option("--source", wa.sources, "chain=path of a growing event log");
  watch->add_option("--feed", wa.feed, "Replay a generated trace directory in simulated time");
  watch->add_option("--alerts", wa.alerts, "Alert log (default <store>/alerts.jsonl)");
  watch->add_option("--outbox", wa.outbox, "Write webhook requests here instead");
  watch->add_option("--url", wa.url, "Webhook URL recorded in outbox requests");
  watch->add_option("--interval", wa.interval, "Seconds between polls")->check(CLI::PositiveNumber);
  watch->add_option("--polls", wa.polls, "Stop after this many polls");
  watch->add_flag("--parallel", wa.parallel, "Fetch sources concurrently");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic multi-chain trace");
  fs::path scenario;
  fs::path sim_out;
  simulate->add_option("scenario", scenario, "Scenario file (JSON)")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Label findings and tabulate per bridge");
  fs::path findings;
  std::optional<fs::path> rules;
  std::optional<fs::path> report_out;
  report->add_option("findings", findings)->required();
  report->add_option("--rules", rules, "Labelling rules (JSON)");
  report->add_option("--out", report_out, "JSON output (default: stdout)");

  auto* demo = app.add_subcommand("ate-demo", "Announce-then-execute correctness experiment");
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  bool benign_only = false;
  std::optional<fs::path> transcript;
  demo->add_option("--seed", seed);
  demo->add_option("--seeds", seeds, "Run this many consecutive seeds")->check(CLI::PositiveNumber);
  demo->add_flag("--benign-only", benign_only);
  demo->add_option("--transcript", transcript, "Ticket transcript (newline-delimited JSON)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kClean : kOperational;
  }

  try {
    if (*audit) return cmd_audit(io, config, logs, out_path, strict, flow, bucket);
    if (*watch) return cmd_watch(io, wa);
    if (*simulate) return cmd_simulate(io, scenario, sim_out);
    if (*report) return cmd_report(io, findings, rules, report_out);
    if (*demo) return cmd_ate_demo(io, seed, seeds, benign_only, transcript);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kOperational;
  }
  return kOperational;
}

}  // namespace bridgeaudit::cli

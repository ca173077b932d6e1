#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit::cli {

enum ExitCode : int { kClean = 0, kOperational = 1, kViolations = 2 };

/// Labelling rules for `report`. Every list is optional.
struct ReportRules {
  std::set<std::string> suspicious_addresses;  // recipients
  std::set<std::string> new_txs;               // withdrawal tx hashes
  std::set<std::string> new_addresses;         // recipients
  std::set<TokenId> test_tokens;
};

/// Throws ConfigError.
ReportRules parse_rules(const nlohmann::json& j);

/// One row of the operator table.
struct ReportRow {
  std::size_t analyzed = 0;
  std::size_t reported = 0;    // attack categories
  std::size_t new_ = 0;
  std::size_t test = 0;        // test-token findings, never counted as reported
  std::size_t error = 0;       // malformed or anomalous but not an attack
  std::size_t suspicious = 0;
  std::map<Category, std::size_t> categories;
};

struct Report {
  std::map<std::string, ReportRow> per_bridge;
  ReportRow total;
};

Report build_report(std::span<const Finding> findings, const ReportRules& rules);
nlohmann::json to_json(const Report& r);
std::string report_table(const Report& r);

/// Entry point shared by the binary and the tests. argv[0] is ignored.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bridgeaudit::cli

#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "bridgeaudit/audit.hpp"

namespace bridgeaudit {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(const TxRef& ref);
TxRef txref_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Finding& f);
/// Throws CodecError on missing fields or an unknown category.
Finding finding_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Resolution& r);
Resolution resolution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AuditSummary& s);
/// Plain-text per-bridge table: Analyzed, Violations, then one column per
/// non-Balanced category.
std::string summary_table(const AuditSummary& s);

nlohmann::json to_json(const FlowSeries& s);

}  // namespace bridgeaudit

#ifndef DOSEINS_TOOLS_AUDIT_HPP
#define DOSEINS_TOOLS_AUDIT_HPP

// Audit logs are JSON lines:
//   {"type":"create","request":{...}}
//   {"type":"cohort","request":{"patients":3,"dlt":1,"responses":0},"record":{...}}
//   {"type":"insertion","request":{"d_star":2100,"force":true},"record":{...}}
//   {"type":"decline","request":{}}
// The create request is exactly the body accepted by POST /api/v1/trials.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "doseins_tools/json_io.hpp"

namespace doseins {

json create_request(const DoseGrid& grid, const DoseData& data, std::size_t current, const EngineConfig& cfg,
                    std::uint64_t tie_key, std::uint64_t tie_counter);

std::vector<json> audit_lines(const TrialTrace& trace, const EngineConfig& cfg);

std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);

struct HttpCall {
  std::string method;
  std::string path;
  json body;
};

struct HttpReply {
  int status = 0;
  json body;
};

using Transport = std::function<HttpReply(const HttpCall&)>;

struct ReplayReport {
  int events = 0;
  int matched = 0;
  std::vector<std::string> mismatches;
  std::string trial_id;
  bool ok() const { return mismatches.empty() && matched == events; }
};

/// Re-drive an audit log through the HTTP API and compare every returned
/// record with the logged one.
ReplayReport replay_audit(const std::vector<json>& lines, const Transport& transport);

}  // namespace doseins

#endif  // DOSEINS_TOOLS_AUDIT_HPP

#include "doseins_tools/audit.hpp"

#include <fstream>

namespace doseins {

json create_request(const DoseGrid& grid, const DoseData& data, std::size_t current, const EngineConfig& cfg,
                    std::uint64_t tie_key, std::uint64_t tie_counter) {
  return json{{"variant", to_string(cfg.variant)},
              {"adaptive_mode", to_string(cfg.adaptive)},
              {"c", cfg.borrow_threshold},
              {"engine", engine_config_to_json(cfg)},
              {"grid", {{"doses", grid.doses}, {"d_ref", grid.d_ref}}},
              {"data", data},
              {"current", current},
              {"rng", {{"key", tie_key}, {"counter", tie_counter}}}};
}

std::vector<json> audit_lines(const TrialTrace& trace, const EngineConfig& cfg) {
  std::vector<json> out;
  out.push_back({{"type", "create"},
                 {"request", create_request(trace.grid, trace.data, trace.current, cfg, trace.tie_key,
                                            trace.tie_counter)}});
  for (const auto& ev : trace.events) {
    if (const auto* c = std::get_if<CohortEvent>(&ev)) {
      out.push_back({{"type", "cohort"}, {"request", c->outcome}, {"record", c->record}});
    } else {
      const auto& i = std::get<InsertionEvent>(ev);
      out.push_back({{"type", "insertion"},
                     {"request", {{"d_star", i.d_star}, {"force", i.force}}},
                     {"record", i.record}});
    }
  }
  return out;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ReplayReport replay_audit(const std::vector<json>& lines, const Transport& transport) {
  ReplayReport rep;
  if (lines.empty() || lines.front().value("type", "") != "create") {
    rep.mismatches.push_back("audit log must start with a create record");
    return rep;
  }
  const auto created = transport({"POST", "/api/v1/trials", lines.front().at("request")});
  if (created.status != 201) {
    rep.mismatches.push_back("create failed with status " + std::to_string(created.status) + ": " +
                             created.body.dump());
    return rep;
  }
  rep.trial_id = created.body.at("id").get<std::string>();
  int version = created.body.at("version").get<int>();
  const std::string base = "/api/v1/trials/" + rep.trial_id;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    const std::string type = line.value("type", "");
    json body = line.value("request", json::object());
    body["version"] = version;
    HttpCall call{"POST", "", body};
    if (type == "cohort") {
      call.path = base + "/cohorts";
    } else if (type == "insertion") {
      call.path = base + "/insertion";
    } else if (type == "decline") {
      call.path = base + "/insertion";
      call.body["decline"] = true;
    } else {
      rep.mismatches.push_back("line " + std::to_string(i + 1) + ": unknown type '" + type + "'");
      continue;
    }
    ++rep.events;
    const auto reply = transport(call);
    if (reply.status != 200) {
      rep.mismatches.push_back("line " + std::to_string(i + 1) + ": status " + std::to_string(reply.status) + ": " +
                               reply.body.dump());
      break;
    }
    version = reply.body.at("version").get<int>();
    if (type == "decline" || reply.body.at("record") == line.at("record")) {
      ++rep.matched;
    } else {
      rep.mismatches.push_back("line " + std::to_string(i + 1) + ": record differs\n  logged:   " +
                               line.at("record").dump() + "\n  replayed: " + reply.body.at("record").dump());
    }
  }
  return rep;
}

}  // namespace doseins

#include "doseins_tools/service.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace doseins {

namespace {

struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

ServiceResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}, {"status", status}}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<std::string> header(const ServiceRequest& r, std::string_view name) {
  for (const auto& [k, v] : r.headers) {
    if (iequals(k, name)) return v;
  }
  return std::nullopt;
}

int required_version(const json& body) {
  if (!body.contains("version") || !body.at("version").is_number_integer()) {
    throw HttpError(400, "request body must carry the integer 'version' it was based on");
  }
  return body.at("version").get<int>();
}

template <typename F>
auto as_unprocessable(F f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw HttpError(422, e.what());
  } catch (const std::domain_error& e) {
    throw HttpError(422, e.what());
  } catch (const std::invalid_argument& e) {
    throw HttpError(422, e.what());
  }
}

std::string session_id(int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial-%06d", n);
  return buf;
}

int session_number(const std::string& id) {
  if (id.rfind("trial-", 0) != 0) return 0;
  try {
    return std::stoi(id.substr(6));
  } catch (...) {
    return 0;
  }
}

}  // namespace

TrialService::TrialService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.store) {
    std::filesystem::create_directories(*options_.store);
    load_store();
  }
}

std::size_t TrialService::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

HttpReply TrialService::call(const HttpCall& c) {
  ServiceRequest r;
  r.method = c.method;
  r.path = c.path;
  r.body = c.body.is_null() ? "" : c.body.dump();
  if (options_.operator_token) r.headers[kTokenHeader] = *options_.operator_token;
  const auto resp = handle(r);
  return {resp.status, resp.body};
}

ServiceResponse TrialService::handle(const ServiceRequest& request) {
  try {
    const auto parts = split_path(request.path);
    if (parts.size() < 3 || parts[0] != "api" || parts[1] != "v1") throw HttpError(404, "no such endpoint");
    const std::vector<std::string> route(parts.begin() + 2, parts.end());
    const bool post = request.method == "POST";
    if (!post && request.method != "GET") throw HttpError(405, "method not allowed");
    if (post && options_.operator_token && header(request, kTokenHeader) != options_.operator_token) {
      throw HttpError(401, "missing or invalid operator token");
    }
    json body = json::object();
    if (post && !request.body.empty()) {
      try {
        body = json::parse(request.body);
      } catch (const json::parse_error& e) {
        throw HttpError(400, std::string("malformed JSON: ") + e.what());
      }
      if (!body.is_object()) throw HttpError(400, "request body must be a JSON object");
    }

    if (route.size() == 1 && route[0] == "schema") {
      if (post) throw HttpError(405, "method not allowed");
      return {200, schema()};
    }
    if (route[0] != "trials") throw HttpError(404, "no such endpoint");
    if (route.size() == 1) return post ? create(body) : list();

    auto session = find(route[1]);
    if (!session) throw HttpError(404, "unknown trial id: " + route[1]);
    Session& s = *session;
    const std::string sub = route.size() >= 3 ? route[2] : "";
    if (route.size() > 3) throw HttpError(404, "no such endpoint");
    if (sub.empty() || sub == "state") {
      if (post) throw HttpError(405, "method not allowed");
      return get_state(s);
    }
    if (sub == "cohorts") {
      if (!post) throw HttpError(405, "method not allowed");
      return submit_cohort(s, body);
    }
    if (sub == "insertion") return post ? post_insertion(s, body) : get_insertion(s);
    if (sub == "recommendation" && !post) return recommendation(s);
    if (sub == "audit" && !post) return audit(s);
    throw HttpError(sub == "recommendation" || sub == "audit" ? 405 : 404, "no such endpoint");
  } catch (const HttpError& e) {
    return error_response(e.status, e.what());
  } catch (const json::exception& e) {
    return error_response(400, std::string("bad request: ") + e.what());
  } catch (const ConfigError& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

std::shared_ptr<TrialService::Session> TrialService::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<TrialService::Session> TrialService::build_session(const std::string& id,
                                                                   const json& request) const {
  require_keys(request, {"variant", "adaptive_mode", "c", "engine", "grid", "data", "current", "rng", "seed"},
               "trial");
  auto s = std::make_shared<Session>();
  s->id = id;
  const Variant variant = parse_variant(request.at("variant").get<std::string>());
  const AdaptiveMode mode = parse_adaptive_mode(request.value("adaptive_mode", "none"));
  const double c = request.value("c", 1.0);
  s->cfg = engine_config_from_json(request.value("engine", json::object()), variant, mode, c);

  const auto& g = request.at("grid");
  require_keys(g, {"doses", "d_ref"}, "grid");
  DoseGrid grid;
  grid.doses = g.at("doses").get<std::vector<double>>();
  if (grid.doses.empty()) throw ConfigError("grid.doses: must not be empty");
  grid.d_ref = g.contains("d_ref") ? g.at("d_ref").get<double>() : *std::max_element(grid.doses.begin(), grid.doses.end());
  DoseData data = request.contains("data") ? request.at("data").get<DoseData>() : DoseData(grid.doses.size());
  const auto current = request.value("current", std::size_t{0});
  const auto& rng = request.at("rng");
  require_keys(rng, {"key", "counter"}, "rng");
  const auto stream = RngStream::from_state(rng.at("key").get<std::uint64_t>(), rng.at("counter").get<std::uint64_t>());
  s->state = resume_trial(grid, data, current, s->cfg, stream);
  s->version = 1;
  s->audit.push_back({{"type", "create"}, {"request", request}});
  return s;
}

void TrialService::apply_cohort(Session& s, const json& request, json* record) const {
  const auto outcome = cohort_outcome_from_json(request, s.cfg.cohort_size);
  auto res = step(s.state, outcome, s.cfg);
  *record = res.record;
  s.state = std::move(res.state);
}

void TrialService::apply_insertion(Session& s, const json& request, json* record) const {
  if (request.value("decline", false)) {
    s.state = decline_insertion(s.state);
    *record = nullptr;
    return;
  }
  if (!request.contains("d_star") || !request.at("d_star").is_number()) {
    throw ConfigError("insertion.d_star: required number");
  }
  auto res = insert_dose(s.state, request.at("d_star").get<double>(), s.cfg, request.value("force", false));
  *record = res.record;
  s.state = std::move(res.state);
}

void TrialService::persist(const Session& s, const json& line) const {
  if (!options_.store) return;
  const auto dir = *options_.store / s.id;
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "session.jsonl", std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to session store for " + s.id);
}

void TrialService::load_store() {
  for (const auto& entry : std::filesystem::directory_iterator(*options_.store)) {
    const auto file = entry.path() / "session.jsonl";
    if (!entry.is_directory() || !std::filesystem::exists(file)) continue;
    const std::string id = entry.path().filename().string();
    const auto lines = read_jsonl(file);
    if (lines.empty()) continue;
    auto s = build_session(id, lines.front().at("request"));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto& line = lines[i];
      const auto type = line.at("type").get<std::string>();
      json record;
      json stored{{"type", type}, {"request", line.at("request")}};
      if (type == "cohort") {
        apply_cohort(*s, line.at("request"), &record);
        stored["record"] = record;
      } else if (type == "insertion") {
        apply_insertion(*s, line.at("request"), &record);
        stored["record"] = record;
      } else if (type == "decline") {
        json req = line.at("request");
        req["decline"] = true;
        apply_insertion(*s, req, &record);
      } else {
        throw std::runtime_error("unknown record type in " + file.string());
      }
      s->audit.push_back(std::move(stored));
      ++s->version;
    }
    sessions_[id] = s;
    next_id_ = std::max(next_id_, session_number(id) + 1);
  }
}

ServiceResponse TrialService::create(const json& body) {
  json request = body;
  if (!request.contains("rng")) {
    std::uint64_t seed = 0;
    if (request.contains("seed")) {
      if (!request.at("seed").is_number_unsigned()) throw HttpError(400, "seed: expected a non-negative integer");
      seed = request.at("seed").get<std::uint64_t>();
    }
    const RngStream stream(seed, 1);
    request.erase("seed");
    request["rng"] = {{"key", stream.key()}, {"counter", stream.counter()}};
  }
  std::lock_guard lock(sessions_mutex_);
  const std::string id = session_id(next_id_);
  auto s = as_unprocessable([&] { return build_session(id, request); });
  persist(*s, s->audit.front());
  ++next_id_;
  sessions_[id] = s;
  return {201, json{{"id", id}, {"version", s->version}, {"state", state_to_json(s->state, s->cfg)}}};
}

ServiceResponse TrialService::list() const {
  std::lock_guard lock(sessions_mutex_);
  json out = json::array();
  for (const auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mutex);
    out.push_back({{"id", id},
                   {"version", s->version},
                   {"variant", to_string(s->cfg.variant)},
                   {"status", to_string(s->state.status)}});
  }
  return {200, json{{"trials", out}}};
}

ServiceResponse TrialService::get_state(Session& s) const {
  std::lock_guard lock(s.mutex);
  return {200, json{{"id", s.id},
                    {"version", s.version},
                    {"state", state_to_json(s.state, s.cfg)},
                    {"config", engine_config_to_json(s.cfg)}}};
}

ServiceResponse TrialService::submit_cohort(Session& s, const json& body) {
  std::lock_guard lock(s.mutex);
  const int version = required_version(body);
  if (version != s.version) {
    return {409, json{{"error", "version conflict"}, {"status", 409}, {"version", s.version}}};
  }
  if (s.state.status != TrialStatus::kActive) {
    return {409, json{{"error", "trial is not accepting cohorts"},
                      {"status", 409},
                      {"trial_status", to_string(s.state.status)},
                      {"version", s.version}}};
  }
  if (s.state.pending_gap) {
    return {409, json{{"error", "an insertion decision is pending; insert or decline first"},
                      {"status", 409},
                      {"version", s.version}}};
  }
  json request = body;
  request.erase("version");
  require_keys(request, {"patients", "dlt", "responses"}, "cohort");
  Session next_state_holder;
  next_state_holder.cfg = s.cfg;
  next_state_holder.state = s.state;
  json record;
  as_unprocessable([&] {
    apply_cohort(next_state_holder, request, &record);
    return 0;
  });
  const auto o = cohort_outcome_from_json(request, s.cfg.cohort_size);
  json line{{"type", "cohort"}, {"request", o}, {"record", record}};
  persist(s, line);
  s.state = std::move(next_state_holder.state);
  s.audit.push_back(std::move(line));
  ++s.version;
  return {200, json{{"id", s.id}, {"version", s.version}, {"record", record}, {"state", state_to_json(s.state, s.cfg)}}};
}

ServiceResponse TrialService::get_insertion(Session& s) const {
  std::lock_guard lock(s.mutex);
  const auto& st = s.state;
  json j{{"id", s.id},
         {"version", s.version},
         {"status", to_string(st.status)},
         {"pending", st.pending_gap.has_value()},
         {"declined", st.insertion_declined},
         {"gap", nullptr},
         {"gap_doses", nullptr},
         {"suggested_d_star", nullptr},
         {"inserted", nullptr}};
  if (st.pending_gap) {
    const auto [a, b] = *st.pending_gap;
    j["gap"] = {a, b};
    j["gap_doses"] = {st.grid.doses[a], st.grid.doses[b]};
    j["suggested_d_star"] = (st.grid.doses[a] + st.grid.doses[b]) / 2;
  }
  if (st.inserted) j["inserted"] = state_to_json(st, s.cfg).at("inserted");
  return {200, j};
}

ServiceResponse TrialService::post_insertion(Session& s, const json& body) {
  std::lock_guard lock(s.mutex);
  const int version = required_version(body);
  if (version != s.version) {
    return {409, json{{"error", "version conflict"}, {"status", 409}, {"version", s.version}}};
  }
  json request = body;
  request.erase("version");
  require_keys(request, {"d_star", "force", "decline"}, "insertion");
  Session next;
  next.cfg = s.cfg;
  next.state = s.state;
  json record;
  as_unprocessable([&] {
    apply_insertion(next, request, &record);
    return 0;
  });
  json line;
  if (request.value("decline", false)) {
    line = {{"type", "decline"}, {"request", json::object()}};
  } else {
    line = {{"type", "insertion"},
            {"request", {{"d_star", request.at("d_star")}, {"force", request.value("force", false)}}},
            {"record", record}};
  }
  persist(s, line);
  s.state = std::move(next.state);
  s.audit.push_back(std::move(line));
  ++s.version;
  return {200, json{{"id", s.id}, {"version", s.version}, {"record", record}, {"state", state_to_json(s.state, s.cfg)}}};
}

ServiceResponse TrialService::recommendation(Session& s) const {
  std::lock_guard lock(s.mutex);
  const auto& st = s.state;
  json j{{"id", s.id}, {"version", s.version}, {"status", to_string(st.status)}, {"next", nullptr}, {"final", nullptr}};
  j["pending_gap"] = st.pending_gap ? json::array({st.pending_gap->first, st.pending_gap->second}) : json(nullptr);
  if (st.status == TrialStatus::kActive || st.status == TrialStatus::kAwaitingInsertion) {
    j["next"] = {{"index", st.current},
                 {"dose", st.grid.doses[st.current]},
                 {"boundaries", boundaries_at(st, st.current, s.cfg)}};
  } else {
    j["final"] = {{"mtd", select_mtd(st, s.cfg)},
                  {"obd", is_efficacy_design(s.cfg.variant) ? json(select_obd(st, s.cfg)) : json(nullptr)}};
  }
  return {200, j};
}

ServiceResponse TrialService::audit(Session& s) const {
  std::lock_guard lock(s.mutex);
  return {200, json{{"id", s.id}, {"version", s.version}, {"lines", s.audit}}};
}

json TrialService::schema() {
  const json counts{{"type", "object"},
                    {"properties", {{"n", {{"type", "integer"}}}, {"t", {{"type", "integer"}}}, {"u", {{"type", "integer"}}}}}};
  return json{
      {"version", "v1"},
      {"prefix", kApiPrefix},
      {"auth", {{"header", kTokenHeader}, {"applies_to", "POST"}, {"required", "when the service has a token"}}},
      {"errors",
       {{"400", "malformed body"},
        {"401", "missing operator token"},
        {"404", "unknown trial or endpoint"},
        {"409", "stale version or trial not accepting the mutation"},
        {"422", "invalid counts or configuration; the trial is unchanged"}}},
      {"endpoints",
       json::array({
           {{"method", "GET"}, {"path", "/api/v1/schema"}, {"response", "this document"}},
           {{"method", "GET"}, {"path", "/api/v1/trials"}, {"response", "{trials:[{id,version,variant,status}]}"}},
           {{"method", "POST"},
            {"path", "/api/v1/trials"},
            {"request",
             {{"type", "object"},
              {"required", {"variant", "grid"}},
              {"properties",
               {{"variant", {{"enum", {"boin", "hybrid-iboin", "boinet", "hybrid-iboinet"}}}},
                {"adaptive_mode", {{"enum", {"none", "hedge", "ftl", "mixture-blend", "mixture-map"}}}},
                {"c", {{"type", "number"}, {"minimum", 0}}},
                {"engine", {{"type", "object"}}},
                {"grid", {{"type", "object"}, {"properties", {{"doses", {{"type", "array"}}}, {"d_ref", {{"type", "number"}}}}}}},
                {"data", {{"type", "array"}, {"items", counts}}},
                {"current", {{"type", "integer"}}},
                {"seed", {{"type", "integer"}}},
                {"rng", {{"type", "object"}, {"properties", {{"key", {{"type", "integer"}}}, {"counter", {{"type", "integer"}}}}}}}}}}},
            {"response", "201 {id,version,state}"}},
           {{"method", "GET"}, {"path", "/api/v1/trials/{id}"}, {"response", "{id,version,state,config}"}},
           {{"method", "POST"},
            {"path", "/api/v1/trials/{id}/cohorts"},
            {"request",
             {{"type", "object"},
              {"required", {"version", "dlt"}},
              {"properties",
               {{"version", {{"type", "integer"}}},
                {"patients", {{"type", "integer"}}},
                {"dlt", {{"type", "integer"}}},
                {"responses", {{"type", "integer"}}}}}}},
            {"response", "{id,version,record,state}"}},
           {{"method", "GET"},
            {"path", "/api/v1/trials/{id}/insertion"},
            {"response", "{pending,gap,gap_doses,suggested_d_star,inserted}"}},
           {{"method", "POST"},
            {"path", "/api/v1/trials/{id}/insertion"},
            {"request",
             {{"type", "object"},
              {"required", {"version"}},
              {"properties",
               {{"version", {{"type", "integer"}}},
                {"d_star", {{"type", "number"}}},
                {"force", {{"type", "boolean"}}},
                {"decline", {{"type", "boolean"}}}}}}},
            {"response", "{id,version,record,state}"}},
           {{"method", "GET"},
            {"path", "/api/v1/trials/{id}/recommendation"},
            {"response", "{status,next:{index,dose,boundaries}|null,final:{mtd,obd}|null}"}},
           {{"method", "GET"}, {"path", "/api/v1/trials/{id}/audit"}, {"response", "{lines:[audit records]}"}},
       })}};
}

}  // namespace doseins

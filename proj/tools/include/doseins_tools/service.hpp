#ifndef DOSEINS_TOOLS_SERVICE_HPP
#define DOSEINS_TOOLS_SERVICE_HPP

// Trial-conduct service. All routing and validation lives here so it can be
// exercised without a socket; server.hpp only binds it to HTTP.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "doseins_tools/audit.hpp"
#include "doseins_tools/json_io.hpp"

namespace doseins {

inline constexpr const char* kApiPrefix = "/api/v1";
inline constexpr const char* kTokenHeader = "X-Operator-Token";

struct ServiceOptions {
  std::optional<std::filesystem::path> store;   // session directory; in-memory if empty
  std::optional<std::string> operator_token;    // required on mutations when set
};

struct ServiceRequest {
  std::string method;
  std::string path;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ServiceResponse {
  int status = 200;
  json body;
};

class TrialService {
 public:
  explicit TrialService(ServiceOptions options = {});

  ServiceResponse handle(const ServiceRequest& request);

  /// Convenience for in-process callers such as replay.
  HttpReply call(const HttpCall& call);

  std::size_t session_count() const;
  static json schema();

 private:
  struct Session {
    std::string id;
    int version = 0;
    EngineConfig cfg;
    TrialState state;
    std::vector<json> audit;
    mutable std::mutex mutex;
  };

  ServiceResponse create(const json& body);
  ServiceResponse list() const;
  ServiceResponse get_state(Session& s) const;
  ServiceResponse submit_cohort(Session& s, const json& body);
  ServiceResponse get_insertion(Session& s) const;
  ServiceResponse post_insertion(Session& s, const json& body);
  ServiceResponse recommendation(Session& s) const;
  ServiceResponse audit(Session& s) const;

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> build_session(const std::string& id, const json& request) const;
  void apply_cohort(Session& s, const json& request, json* record) const;
  void apply_insertion(Session& s, const json& request, json* record) const;
  void persist(const Session& s, const json& line) const;
  void load_store();

  ServiceOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
};

}  // namespace doseins

#endif  // DOSEINS_TOOLS_SERVICE_HPP

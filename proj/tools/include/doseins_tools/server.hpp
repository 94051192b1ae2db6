#ifndef DOSEINS_TOOLS_SERVER_HPP
#define DOSEINS_TOOLS_SERVER_HPP

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "doseins_tools/audit.hpp"
#include "doseins_tools/service.hpp"

namespace doseins {

class HttpServer {
 public:
  HttpServer(TrialService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Bind to host:port (port 0 picks a free port); returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Transport that sends calls to a running service at `base_url`
/// (e.g. "http://127.0.0.1:8080").
Transport http_transport(const std::string& base_url, std::optional<std::string> token = std::nullopt);

}  // namespace doseins

#endif  // DOSEINS_TOOLS_SERVER_HPP

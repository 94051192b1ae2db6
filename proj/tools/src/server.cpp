#include "doseins_tools/server.hpp"

#include <httplib.h>

namespace doseins {

struct HttpServer::Impl {
  TrialService& service;
  httplib::Server server;
};

namespace {

void forward(TrialService& service, const httplib::Request& req, httplib::Response& res) {
  ServiceRequest r;
  r.method = req.method;
  r.path = req.path;
  r.body = req.body;
  for (const auto& [k, v] : req.headers) r.headers[k] = v;
  const auto out = service.handle(r);
  res.status = out.status;
  res.set_content(out.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(TrialService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(new Impl{service, {}}) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) { forward(impl_->service, req, res); };
  const std::string api = std::string(kApiPrefix) + R"((/.*)?)";
  impl_->server.Get(api, handler);
  impl_->server.Post(api, handler);
  impl_->server.Put(api, handler);
  impl_->server.Delete(api, handler);
  if (static_dir) impl_->server.set_mount_point("/", static_dir->string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

Transport http_transport(const std::string& base_url, std::optional<std::string> token) {
  auto client = std::make_shared<httplib::Client>(base_url);
  client->set_connection_timeout(5);
  client->set_read_timeout(60);
  return [client, token](const HttpCall& call) -> HttpReply {
    httplib::Headers headers;
    if (token) headers.emplace(kTokenHeader, *token);
    httplib::Result res = call.method == "POST"
                              ? client->Post(call.path, headers, call.body.dump(), "application/json")
                              : client->Get(call.path, headers);
    if (!res) throw std::runtime_error("HTTP request failed: " + httplib::to_string(res.error()));
    HttpReply reply;
    reply.status = res->status;
    reply.body = res->body.empty() ? json(nullptr) : json::parse(res->body);
    return reply;
  };
}

}  // namespace doseins

#include "semret/http_api.hpp"

#include <map>
#include <stdexcept>

#include "httplib.h"

namespace semret::service {

struct HttpServer::Impl {
  std::shared_ptr<ApiHandler> handler;
  httplib::Server server;
};

namespace {

void reply(const ApiResponse& r, httplib::Response& res) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<ApiHandler> handler) : impl_(std::make_unique<Impl>()) {
  if (!handler) throw std::invalid_argument("HTTP server needs a handler");
  impl_->handler = std::move(handler);
  auto route = [h = impl_->handler](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    reply(h->handle(req.method, req.path, query, req.body), res);
  };
  auto& s = impl_->server;
  s.Get(".*", route);
  s.Post(".*", route);
  s.Put(".*", route);
  s.Delete(".*", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  auto& s = impl_->server;
  const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  port_ = bound;
  thread_ = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

namespace {

HttpReply to_reply(const httplib::Result& r) {
  if (!r) throw std::runtime_error("HTTP request failed: " + httplib::to_string(r.error()));
  return {r->status, r->body};
}

}  // namespace

HttpReply http_get(const std::string& host, int port, const std::string& path) {
  httplib::Client c(host, port);
  return to_reply(c.Get(path));
}

HttpReply http_post(const std::string& host, int port, const std::string& path, const std::string& body) {
  httplib::Client c(host, port);
  return to_reply(c.Post(path, body, "application/json"));
}

}  // namespace semret::service

#pragma once

// HTTP transport for the service API. The only translation unit that sees the
// HTTP library.

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "semret/service.hpp"

namespace semret::service {

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<ApiHandler> handler);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws when binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<int> port_{0};
};

/// Minimal blocking client for tests and tools.
struct HttpReply {
  int status = 0;
  std::string body;
};

HttpReply http_get(const std::string& host, int port, const std::string& path);
HttpReply http_post(const std::string& host, int port, const std::string& path, const std::string& body);

}  // namespace semret::service

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "openintent/service/service.hpp"

namespace openintent {

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

/// "host:port", ":port" or "port".
ListenAddress parse_listen_address(std::string_view text);

/// HTTP status for an error kind: 400 invalid_argument / not_implemented,
/// 404 not_found, 409 conflict / cancelled, 500 otherwise.
int http_status(ErrorKind kind);

/// JSON API under /api/v1. Error bodies are {"error": {"kind", "message"}}.
class HttpServer {
 public:
  HttpServer(Service& service, std::filesystem::path static_dir = {});
  ~HttpServer();

  /// Binds and returns the port actually bound. Throws io on failure.
  int bind(const ListenAddress& address);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace openintent

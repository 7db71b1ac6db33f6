#pragma once

#include <memory>
#include <string>
#include <utility>

#include "newsrec/service.hpp"

namespace newsrec {

// Splits "host:port"; throws std::invalid_argument("bad listen address").
std::pair<std::string, int> parse_listen(const std::string& listen);

// HTTP/1.1 face of RecService:
//   GET  /v1/recommend?user_id=<id>&m=<int>[&now=<ts>][&breakdown=1]
//   POST /v1/events            (line-delimited event records)
//   GET  /v1/health
//   GET  /v1/metrics
class HttpServer {
 public:
  HttpServer(RecService& service, std::string host, int port);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  bool start();
  void stop();
  bool running() const;
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace newsrec

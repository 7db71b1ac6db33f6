#include "newsrec/http_server.hpp"

#include <atomic>
#include <ctime>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace newsrec {

std::pair<std::string, int> parse_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= listen.size())
    throw std::invalid_argument("bad listen address");
  int port;
  try {
    std::size_t used = 0;
    port = std::stoi(listen.substr(colon + 1), &used);
    if (used != listen.size() - colon - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad listen address");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("bad listen address");
  return {listen.substr(0, colon), port};
}

struct HttpServer::Impl {
  RecService& service;
  std::string host;
  int requested_port;
  int bound_port = -1;
  httplib::Server server;
  std::thread worker;
  std::atomic<bool> running{false};

  Impl(RecService& svc, std::string h, int p)
      : service(svc), host(std::move(h)), requested_port(p) {
    server.Get("/v1/recommend", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("user_id")) {
        res.status = 400;
        res.set_content("{\"error\":\"missing user_id\"}", "application/json");
        return;
      }
      std::string user_id = req.get_param_value("user_id");
      int m = 20;
      Timestamp now = static_cast<Timestamp>(std::time(nullptr));
      try {
        if (req.has_param("m")) m = std::stoi(req.get_param_value("m"));
        if (req.has_param("now")) now = std::stoll(req.get_param_value("now"));
      } catch (const std::exception&) {
        res.status = 400;
        res.set_content("{\"error\":\"bad parameter\"}", "application/json");
        return;
      }
      bool breakdown = req.has_param("breakdown") && req.get_param_value("breakdown") == "1";
      try {
        RecommendResponse out = service.recommend(user_id, m, now, breakdown);
        res.set_content(out.to_json(), "application/json");
      } catch (const std::invalid_argument& e) {
        res.status = 400;
        res.set_content(std::string("{\"error\":\"") + e.what() + "\"}", "application/json");
      } catch (const std::runtime_error& e) {
        res.status = 503;
        res.set_content(std::string("{\"error\":\"") + e.what() + "\"}", "application/json");
      }
    });
    server.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
      IngestAck ack = service.ingest(req.body);
      res.set_content(ack.to_json(), "application/json");
    });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(service.health_json(static_cast<Timestamp>(std::time(nullptr))),
                      "application/json");
    });
    server.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(service.metrics_json(), "application/json");
    });
  }
};

HttpServer::HttpServer(RecService& service, std::string host, int port)
    : impl_(std::make_unique<Impl>(service, std::move(host), port)) {}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::start() {
  if (impl_->running.load()) return true;
  if (impl_->requested_port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->host);
    if (impl_->bound_port < 0) return false;
  } else {
    if (!impl_->server.bind_to_port(impl_->host, impl_->requested_port)) return false;
    impl_->bound_port = impl_->requested_port;
  }
  impl_->running.store(true);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return true;
}

void HttpServer::stop() {
  if (!impl_->running.exchange(false)) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

bool HttpServer::running() const { return impl_->running.load(); }

int HttpServer::port() const { return impl_->bound_port; }

}  // namespace newsrec

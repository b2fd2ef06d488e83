#include <httplib.h>

#include "figsbd/serve.hpp"

namespace figsbd::serve {

struct HttpServer::Impl {
  explicit Impl(ServeApp& a) : app(a) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      Request r;
      r.method = req.method;
      r.path = req.path;
      for (const auto& [k, v] : req.params) r.query.emplace(k, v);
      r.body = req.body;
      Response out;
      try {
        out = app.handle(r);
      } catch (const std::exception& e) {
        out = error_response(500, e.what());
      }
      res.status = out.status;
      if (!out.body.is_null()) res.set_content(out.body.dump(), "application/json");
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Options(".*", handler);
  }

  ServeApp& app;
  httplib::Server server;
};

HttpServer::HttpServer(ServeApp& app) : impl_(std::make_unique<Impl>(app)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace figsbd::serve

#include "openintent/service/http_server.hpp"

#include <charconv>

#include <httplib.h>

namespace openintent {

ListenAddress parse_listen_address(std::string_view text) {
  ListenAddress a;
  std::string_view port = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) a.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  int p = -1;
  const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
  if (ec != std::errc() || end != port.data() + port.size() || p < 0 || p > 65535)
    fail(ErrorKind::invalid_argument, "invalid listen address '" + std::string(text) + "' (expected host:port)");
  a.port = p;
  return a;
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::not_implemented: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict:
    case ErrorKind::cancelled: return 409;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  send_json(res, json{{"error", {{"kind", to_string(kind)}, {"message", message}}}}, http_status(kind));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_argument, std::string("request body is not valid JSON: ") + e.what());
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const Error& e) {
      send_error(res, e.kind(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorKind::invalid_argument, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorKind::internal, e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {}
};

HttpServer::HttpServer(Service& service, std::filesystem::path static_dir) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  Service& svc = service;
  const std::string api = "/api/v1";

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.Get(api + "/health", guarded([&svc](const auto&, auto& res) { send_json(res, svc.health()); }));
  srv.Get(api + "/schema", guarded([&svc](const auto&, auto& res) { send_json(res, svc.schema()); }));

  srv.Post(api + "/datasets", guarded([&svc](const auto& req, auto& res) {
             const json body = parse_body(req);
             reject_unknown_keys(body, {"name", "path", "format"}, "dataset registration");
             if (!body.contains("name") || !body.contains("path"))
               fail(ErrorKind::invalid_argument, "dataset registration needs 'name' and 'path'");
             const auto entry = svc.register_dataset(body.at("name").template get<std::string>(),
                                                     body.at("path").template get<std::string>(),
                                                     parse_dataset_format(body.value("format", "tsv")));
             send_json(res, entry.to_json(), 201);
           }));
  srv.Get(api + "/datasets", guarded([&svc](const auto&, auto& res) {
            json arr = json::array();
            for (const auto& e : svc.list_datasets()) arr.push_back(e.to_json());
            send_json(res, json{{"datasets", arr}});
          }));
  srv.Get(api + R"(/datasets/([^/]+)/stats)", guarded([&svc](const auto& req, auto& res) {
            send_json(res, svc.dataset_stats(req.matches[1]));
          }));
  srv.Delete(api + R"(/datasets/([^/]+))", guarded([&svc](const auto& req, auto& res) {
               svc.delete_dataset(req.matches[1]);
               send_json(res, json{{"deleted", std::string(req.matches[1])}});
             }));

  srv.Post(api + "/runs", guarded([&svc](const auto& req, auto& res) {
             json body = parse_body(req);
             // Accept the bare config or {"config": {...}}.
             if (body.is_object() && body.size() == 1 && body.contains("config")) body = body.at("config");
             send_json(res, svc.submit(body).to_json(false), 201);
           }));
  srv.Get(api + "/runs", guarded([&svc](const auto& req, auto& res) {
            std::optional<RunState> filter;
            if (req.has_param("state")) filter = parse_run_state(req.get_param_value("state"));
            json arr = json::array();
            for (const auto& r : svc.list_runs(filter)) arr.push_back(r.to_json(false));
            send_json(res, json{{"runs", arr}});
          }));
  srv.Get(api + R"(/runs/([^/]+))", guarded([&svc](const auto& req, auto& res) {
            send_json(res, svc.get_run(req.matches[1]).to_json(true));
          }));
  srv.Post(api + R"(/runs/([^/]+)/cancel)", guarded([&svc](const auto& req, auto& res) {
             send_json(res, svc.cancel(req.matches[1]).to_json(false));
           }));
  srv.Get(api + R"(/runs/([^/]+)/views/([^/]+))", guarded([&svc](const auto& req, auto& res) {
            json params = json::object();
            for (const auto& [k, v] : req.params) params[k] = v;
            send_json(res, svc.view(req.matches[1], req.matches[2], params));
          }));
  srv.Get(api + R"(/runs/([^/]+)/report)", guarded([&svc](const auto& req, auto& res) {
            send_json(res, svc.report(req.matches[1]));
          }));
  srv.Post(api + R"(/runs/([^/]+)/predict)", guarded([&svc](const auto& req, auto& res) {
             send_json(res, svc.predict(req.matches[1], parse_body(req)));
           }));

  if (!static_dir.empty() && !srv.set_mount_point("/", static_dir.string()))
    fail(ErrorKind::invalid_argument, "static directory does not exist: " + static_dir.string());

  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404) {
      send_error(res, ErrorKind::not_found, "no route for " + req.method + " " + req.path);
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const ListenAddress& address) {
  auto& srv = impl_->server;
  if (address.port == 0) {
    const int port = srv.bind_to_any_port(address.host);
    if (port < 0) fail(ErrorKind::io, "cannot bind " + address.host);
    return port;
  }
  if (!srv.bind_to_port(address.host, address.port))
    fail(ErrorKind::io, "cannot bind " + address.host + ":" + std::to_string(address.port));
  return address.port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace openintent

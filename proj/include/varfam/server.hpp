#pragma once

// HTTP routes for the annotation service (cpp-httplib).

#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "varfam/annotation.hpp"
#include "varfam/error.hpp"

namespace varfam::annotation {

namespace detail {

inline void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}, {"status", status}}, status);
}

/// Runs `fn`, mapping exceptions to JSON error responses.
inline void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    send_error(res, e.status(), e.what());
  } catch (const std::exception& e) {
    spdlog::error("request failed: {}", e.what());
    send_error(res, 500, e.what());
  }
}

}  // namespace detail

/// Registers every route on `server`. `static_dir`, when non-empty, is
/// mounted at / for the browser frontend.
inline void install_routes(httplib::Server& server, AnnotationService& service,
                           const std::filesystem::path& static_dir = {}) {
  using detail::guarded;
  using detail::send_json;

  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.health()); });
  });

  server.Get("/families", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
      send_json(res, service.list(parse_list_query(params)));
    });
  });

  server.Get(R"(/families/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.get(req.matches[1])); });
  });

  server.Put(R"(/families/([^/]+)/annotation)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded()) throw ApiError(400, "request body is not valid JSON");
      send_json(res, service.put(req.matches[1], body));
    });
  });

  server.Get("/export", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string format = req.has_param("format") ? req.get_param_value("format") : "jsonl";
      if (format == "csv") {
        res.set_content(service.export_csv(), "text/csv; charset=utf-8");
      } else if (format == "jsonl") {
        res.set_content(service.export_jsonl(), "application/x-ndjson; charset=utf-8");
      } else {
        throw ApiError(400, "format must be csv or jsonl");
      }
    });
  });

  server.Post("/import", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::istringstream in(req.body);
      send_json(res, {{"imported", service.import_jsonl(in)}});
    });
  });

  server.Get("/summary/categories", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, service.category_summary()); });
  });

  if (!static_dir.empty()) {
    if (!server.set_mount_point("/", static_dir.string())) {
      throw ConfigError("static directory not found: " + static_dir.string());
    }
  }
}

/// Splits "host:port" (port defaults to 8080).
inline std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) return {bind.empty() ? "127.0.0.1" : bind, 8080};
  const std::string host = bind.substr(0, colon);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(bind.substr(colon + 1), &used);
    if (used != bind.size() - colon - 1) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw ConfigError("bind: bad port in '" + bind + "'");
  return {host.empty() ? "127.0.0.1" : host, port};
}

}  // namespace varfam::annotation

#ifndef SPLCMAP_SERVER_HPP
#define SPLCMAP_SERVER_HPP

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "splcmap/cmap_document.hpp"
#include "splcmap/error.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Read-only views over a built document and the corpus it was built from.
/// Kept free of networking so the handlers can be exercised directly.
class CmapService {
 public:
  CmapService(std::string document_text, std::filesystem::path corpus_root)
      : text_(std::move(document_text)),
        doc_(parse_document(text_)),
        root_(std::filesystem::weakly_canonical(corpus_root)) {}

  const CmapDocument& document() const { return doc_; }

  HttpReply cmap() const { return {200, "application/json", text_}; }

  /// Raw text of a corpus file. Paths that leave the corpus root are refused.
  HttpReply asset(std::string_view relative) const {
    const std::filesystem::path rel(relative);
    if (relative.empty() || rel.is_absolute() || relative.find('\\') != std::string_view::npos)
      return error(403, "path escapes the corpus root");
    for (const auto& part : rel)
      if (part == "..") return error(403, "path escapes the corpus root");

    std::error_code ec;
    const auto full = std::filesystem::weakly_canonical(root_ / rel, ec);
    if (ec || !inside_root(full)) return error(403, "path escapes the corpus root");
    if (!std::filesystem::is_regular_file(full, ec)) return error(404, "no such asset");

    std::ifstream in(full, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return {200, "text/plain; charset=utf-8", buf.str()};
  }

  /// Known/new status of every concept given the comma-separated feature set.
  HttpReply overlay(std::string_view features) const {
    const auto names = split_list(features, ',');
    OverlayResult r;
    try {
      r = known_overlay(doc_, std::set<std::string>(names.begin(), names.end()));
    } catch (const Error& e) {
      return error(400, e.what());
    }
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [id, status] : r.statuses) j[id] = to_string(status);
    return {200, "application/json", j.dump() + "\n"};
  }

 private:
  static HttpReply error(int status, const std::string& message) {
    nlohmann::json j{{"error", message}};
    return {status, "application/json", j.dump() + "\n"};
  }

  bool inside_root(const std::filesystem::path& p) const {
    auto r = root_.begin();
    auto q = p.begin();
    for (; r != root_.end(); ++r, ++q) {
      if (r->empty() && std::next(r) == root_.end()) break;  // trailing separator
      if (q == p.end() || *q != *r) return false;
    }
    return true;
  }

  std::string text_;
  CmapDocument doc_;
  std::filesystem::path root_;
};

/// Wires the service into an HTTP server. Static viewer files, when given,
/// are served from `/`.
inline std::unique_ptr<httplib::Server> make_server(
    const CmapService& service, const std::optional<std::filesystem::path>& viewer_dir) {
  auto server = std::make_unique<httplib::Server>();
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server->Get("/api/cmap", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.cmap());
  });
  server->Get(R"(/api/asset/(.+))",
              [&service, send](const httplib::Request& req, httplib::Response& res) {
                send(res, service.asset(req.matches[1].str()));
              });
  server->Get("/api/overlay", [&service, send](const httplib::Request& req,
                                               httplib::Response& res) {
    send(res, service.overlay(req.has_param("features") ? req.get_param_value("features") : ""));
  });
  if (viewer_dir) {
    if (!server->set_mount_point("/", viewer_dir->string()))
      throw Error("viewer directory not found: " + viewer_dir->string());
  } else {
    server->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("viewer assets not installed; the document is at /api/cmap\n",
                      "text/plain");
    });
  }
  return server;
}

/// Blocks serving until the process is stopped. A busy port is an error.
inline void serve(const CmapService& service,
                  const std::optional<std::filesystem::path>& viewer_dir,
                  const std::string& host, int port) {
  auto server = make_server(service, viewer_dir);
  if (!server->bind_to_port(host, port))
    throw Error("cannot listen on " + host + ":" + std::to_string(port) +
                " (port in use?)");
  server->listen_after_bind();
}

}  // namespace splcmap

#endif

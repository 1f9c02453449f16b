#include "serve.hpp"

#include <fstream>
#include <regex>
#include <sstream>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

#include <httplib.h>

namespace posefuse::cli {

namespace fs = std::filesystem;

namespace {

bool read_file(const fs::path& p, std::string* out) {
  std::ifstream is(p, std::ios::binary);
  if (!is) return false;
  std::ostringstream ss;
  ss << is.rdbuf();
  *out = ss.str();
  return true;
}

const char* content_type(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

void fail(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(msg + "\n", "text/plain");
}

}  // namespace

struct ReviewServer::Impl {
  fs::path root;
  httplib::Server server;

  fs::path sequence_dir(const std::string& seq) const { return root / seq; }

  void routes() {
    // Sequence names are restricted so requests cannot escape the root.
    const std::string seq = R"(([A-Za-z0-9_][A-Za-z0-9_.\-]*))";

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    server.Get("/bundle/" + seq, [this](const httplib::Request& req, httplib::Response& res) {
      std::string body;
      if (!read_file(sequence_dir(req.matches[1]) / "overlays.json", &body)) {
        return fail(res, 404, "no overlay bundle for sequence " + req.matches[1].str());
      }
      res.set_content(body, "application/json");
    });

    server.Get("/frame/" + seq + R"(/(\d+))", [this](const httplib::Request& req,
                                                     httplib::Response& res) {
      const fs::path dir = sequence_dir(req.matches[1]);
      SequenceManifest m;
      try {
        m = read_manifest(dir / "manifest.ini");
      } catch (const std::exception& e) {
        return fail(res, 404, e.what());
      }
      if (m.frame_pattern.empty()) return fail(res, 404, "sequence has no frame images");
      const int idx = std::stoi(req.matches[2]);
      std::string body;
      const fs::path p = m.frame_path(idx);
      if (!read_file(p, &body)) return fail(res, 404, "no frame " + std::to_string(idx));
      res.set_content(body, content_type(p));
    });

    server.Get("/overrides/" + seq, [this](const httplib::Request& req, httplib::Response& res) {
      const fs::path dir = sequence_dir(req.matches[1]);
      if (!fs::is_directory(dir)) return fail(res, 404, "unknown sequence " + req.matches[1].str());
      std::string body;
      if (!read_file(dir / "overrides.txt", &body)) body = format_overrides(OverrideFile{});
      res.set_content(body, "text/plain");
    });

    server.Put("/overrides/" + seq, [this](const httplib::Request& req, httplib::Response& res) {
      const fs::path dir = sequence_dir(req.matches[1]);
      SequenceManifest m;
      try {
        m = read_manifest(dir / "manifest.ini");
      } catch (const std::exception& e) {
        return fail(res, 404, e.what());
      }
      OverrideFile parsed;
      try {
        std::istringstream is(req.body);
        parsed = parse_overrides(is, "request body");
      } catch (const Error& e) {
        return fail(res, 400, e.what());
      }
      const int first = m.first_frame;
      const int last = m.first_frame + m.frame_count - 1;
      for (const auto& e : parsed.entries) {
        if (e.start < first || e.end > last) {
          return fail(res, 400, "override [" + std::to_string(e.start) + ", " +
                                    std::to_string(e.end) + "] outside frames [" +
                                    std::to_string(first) + ", " + std::to_string(last) + "]");
        }
      }
      try {
        write_overrides(dir / "overrides.txt", parsed);
      } catch (const Error& e) {
        return fail(res, 500, e.what());
      }
      res.set_content(format_overrides(parsed), "text/plain");
    });
  }
};

ReviewServer::ReviewServer(fs::path root) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(root);
  impl_->routes();
}

ReviewServer::~ReviewServer() = default;

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ReviewServer::listen() { return impl_->server.listen_after_bind(); }

void ReviewServer::stop() { impl_->server.stop(); }

void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace posefuse::cli

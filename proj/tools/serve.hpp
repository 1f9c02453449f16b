#pragma once

// Local HTTP server for the review UI. Sequences live in subdirectories of
// a root directory, each holding manifest.ini and overlays.json:
//
//   GET /bundle/<seq>         overlays.json
//   GET /frame/<seq>/<idx>    image named by the manifest frame pattern
//   GET /overrides/<seq>      overrides.txt (empty override file if absent)
//   PUT /overrides/<seq>      validates the body and writes overrides.txt
//
// PUT is the only route that writes to disk.

#include <filesystem>
#include <memory>
#include <string>

namespace posefuse::cli {

class ReviewServer {
 public:
  explicit ReviewServer(std::filesystem::path root);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds to `port` (0 picks a free port); returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace posefuse::cli

#pragma once

// HTTP/JSON front end over collections and sessions.
//
//   POST /collections                multipart (files "visual", "text"; fields
//                                    "seed", "thumbnail_template") or JSON
//                                    {"visual_path", "text_path", "seed", ...}
//   GET  /collections                list
//   GET  /collections/{id}
//   POST /sessions                   {"collection", "params", "seed",
//                                     "positives", "negatives"}
//   POST /sessions/{id}/feedback     {"relevant": [...], "not_relevant": [...]}
//   POST /sessions/{id}/params       partial params, applied from the next round
//   GET  /sessions/{id}/suggestions
//   GET  /sessions/{id}/stats
//
// Collections persist under <data_dir>/collections/<id>/ and are reloaded at
// startup.

#include <filesystem>
#include <memory>
#include <string>

namespace exq {

class Service {
 public:
  explicit Service(std::filesystem::path data_dir);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Starts serving on a background thread and returns the bound port; port 0
  // picks a free one.
  int start(const std::string& host, int port);
  // Blocks until stop() is called or the listener fails.
  void wait();
  void stop();

  std::size_t collection_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// EXQ_DATA_DIR, or ./exq-data when unset.
std::filesystem::path default_data_dir();

}  // namespace exq

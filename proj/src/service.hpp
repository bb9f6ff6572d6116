// SPDX-License-Identifier: Apache-2.0
//
// HTTP front end for an AnnotationSession:
//   GET  /api/session/next[?cursor=c]  -> 200 task | 204 drained
//   POST /api/session/submit           {"task_id", "best", "worst"} -> 200 | 400 | 404 | 409
//   GET  /api/session/progress         -> {"done", "pending", "consumed_annotations"}
//   GET  /api/task/{id}                -> 200 task | 404
// Task bodies carry only what an annotator should see: no pool indices,
// strategy or scores.
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "session.hpp"

namespace httplib {
class Server;
}

namespace aepo {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::filesystem::path ui_dir;
  std::filesystem::path preferences_out;  // rewritten after every judgment when set
};

std::string task_view_json(const HumanTask& task);
std::string progress_json(const SessionProgress& progress);

class AnnotationService {
 public:
  AnnotationService(AnnotationSession& session, ServiceOptions options);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  // Returns the bound port. Throws kIo if the address is unavailable.
  int bind();
  // Serves until stop(); requires bind().
  void run();
  void stop();
  bool running() const;

 private:
  void install_routes();
  void export_preferences();

  AnnotationSession& session_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex export_mu_;
  int bound_port_ = -1;
};

}  // namespace aepo

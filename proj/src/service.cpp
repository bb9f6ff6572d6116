// SPDX-License-Identifier: Apache-2.0
#include "service.hpp"

#include "error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace aepo {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kJson = "application/json";

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>aepo annotation</title></head>"
    "<body><p>The annotation UI assets are not installed. Start the server with --ui-dir, "
    "or use the JSON API under /api/session.</p></body></html>";

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(ordered_json{{"error", message}}.dump(), kJson);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kValidation:
    case ErrorCode::kParse: return 400;
    default: return 500;
  }
}

}  // namespace

std::string task_view_json(const HumanTask& task) {
  ordered_json body;
  body["task_id"] = task.task_id;
  body["instruction"] = task.instruction;
  body["responses"] = task.responses;
  body["k"] = task.k();
  body["status"] = task.status == TaskStatus::kDone ? "done" : "pending";
  if (task.status == TaskStatus::kDone) {
    body["best"] = *task.best;
    body["worst"] = *task.worst;
  }
  return body.dump();
}

std::string progress_json(const SessionProgress& progress) {
  ordered_json body;
  body["done"] = progress.done;
  body["pending"] = progress.pending;
  body["consumed_annotations"] = progress.consumed_annotations;
  return body.dump();
}

AnnotationService::AnnotationService(AnnotationSession& session, ServiceOptions options)
    : session_(session), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  // httplib defaults to SO_REUSEPORT, which would let a second service
  // silently share the port with the first.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install_routes();
}

AnnotationService::~AnnotationService() { stop(); }

void AnnotationService::install_routes() {
  httplib::Server& srv = *server_;

  srv.Get("/api/session/next", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string cursor = req.has_param("cursor") ? req.get_param_value("cursor") : "default";
    auto task = session_.next(cursor);
    if (!task) {
      res.status = 204;
      return;
    }
    res.set_content(task_view_json(*task), kJson);
  });

  srv.Post("/api/session/submit", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("task_id") || !body["task_id"].is_string() ||
        !body.contains("best") || !body["best"].is_number_unsigned() || !body.contains("worst") ||
        !body["worst"].is_number_unsigned()) {
      reply_error(res, 400, "expected {\"task_id\": string, \"best\": index, \"worst\": index}");
      return;
    }
    try {
      const std::string id = body["task_id"].get<std::string>();
      session_.apply_judgment(id, body["best"].get<size_t>(), body["worst"].get<size_t>());
      export_preferences();
      ordered_json reply;
      reply["task_id"] = id;
      reply["status"] = "done";
      reply["progress"] = ordered_json::parse(progress_json(session_.progress()));
      res.set_content(reply.dump(), kJson);
    } catch (const Error& e) {
      reply_error(res, status_for(e.code()), e.what());
    }
  });

  srv.Get("/api/session/progress", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(progress_json(session_.progress()), kJson);
  });

  srv.Get(R"(/api/task/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto task = session_.task(req.matches[1].str());
    if (!task) {
      reply_error(res, 404, "no such task");
      return;
    }
    res.set_content(task_view_json(*task), kJson);
  });

  if (!options_.ui_dir.empty()) {
    if (!srv.set_mount_point("/", options_.ui_dir.string())) {
      throw Error(ErrorCode::kIo, "UI directory " + options_.ui_dir.string() + " does not exist");
    }
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }
}

void AnnotationService::export_preferences() {
  if (options_.preferences_out.empty()) return;
  std::lock_guard lock(export_mu_);
  const auto tmp = std::filesystem::path(options_.preferences_out.string() + ".tmp");
  write_preferences(session_.pairs(), tmp);
  std::filesystem::rename(tmp, options_.preferences_out);
}

int AnnotationService::bind() {
  if (options_.port == 0) {
    bound_port_ = server_->bind_to_any_port(options_.host);
  } else {
    bound_port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (bound_port_ < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return bound_port_;
}

void AnnotationService::run() {
  if (bound_port_ < 0) throw Error(ErrorCode::kState, "service is not bound");
  export_preferences();
  server_->listen_after_bind();
  session_.close();
}

void AnnotationService::stop() {
  if (server_) server_->stop();
}

bool AnnotationService::running() const { return server_ && server_->is_running(); }

}  // namespace aepo

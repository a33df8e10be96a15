// Include after Eigen: <resolv.h> (via httplib) defines _res.
#include "fbipose/error.hpp"
#include "fbipose/hub.hpp"

#include <httplib.h>

namespace fbipose {

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), {{"error", message}, {"code", std::string(to_string(code))}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, ErrorCode::kParse, e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::kInternal, e.what());
  }
}

}  // namespace

struct HubServer::Impl {
  AnnotationHub& hub;
  httplib::Server server;
  std::thread thread;

  explicit Impl(AnnotationHub& h) : hub(h) {}
};

HubServer::HubServer(AnnotationHub& hub, std::string ui_dir) : impl_(std::make_unique<Impl>(hub)) {
  auto& srv = impl_->server;
  AnnotationHub* h = &hub;

  srv.Get("/api/tasks/next", [h](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) fail(ErrorCode::kInvalidArgument, "missing ?annotator=ID");
      auto task = h->next_task(annotator);
      if (!task) {
        send_json(res, 200, {{"done", true}});
        return;
      }
      send_json(res, 200, {{"done", false}, {"task", task->client_view()}});
    });
  });

  srv.Post(R"(/api/tasks/([^/]+)/labels)", [h](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string task_id = req.matches[1];
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
      }
      if (!body.is_object() || !body.contains("annotator") || !body["annotator"].is_string()) {
        fail(ErrorCode::kInvalidArgument, "body needs a string 'annotator'");
      }
      if (!body.contains("labels") || !body["labels"].is_array()) {
        fail(ErrorCode::kInvalidArgument, "body needs a 'labels' array");
      }
      std::vector<int> labels;
      for (const auto& l : body["labels"]) {
        if (!l.is_number_integer()) fail(ErrorCode::kInvalidArgument, "labels must be integers 0, 1 or 2");
        labels.push_back(l.get<int>());
      }
      std::int64_t duration = 0;
      if (body.contains("duration_ms")) {
        if (!body["duration_ms"].is_number()) fail(ErrorCode::kInvalidArgument, "duration_ms must be a number");
        duration = body["duration_ms"].get<std::int64_t>();
      }
      const auto resp = h->submit_labels(body["annotator"].get<std::string>(), task_id, labels, duration);
      send_json(res, 200, resp.to_json());
    });
  });

  srv.Get(R"(/api/annotators/([^/]+)/stats)", [h](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, h->annotator_stats(req.matches[1]).to_json()); });
  });

  srv.Get("/api/export", [h](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::string> who;
      if (req.has_param("annotator")) who = req.get_param_value("annotator");
      res.status = 200;
      res.set_content(serialize_annotations(h->export_annotations(who)), "application/x-ndjson");
    });
  });

  srv.Get("/api/topology", [](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, SkeletonTopology::standard().to_json()); });
  });

  if (!ui_dir.empty() && !srv.set_mount_point("/", ui_dir)) {
    fail(ErrorCode::kIo, "UI directory " + ui_dir + " does not exist");
  }
}

HubServer::~HubServer() { stop(); }

int HubServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void HubServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) fail(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
}

void HubServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fbipose

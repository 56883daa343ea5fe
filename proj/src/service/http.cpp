#include "hairedit/service/http.hpp"

#include <httplib.h>

#include <iostream>

namespace hairedit::service {

using nlohmann::json;

struct HttpServer::Impl {
  Service& svc;
  httplib::Server server;
  explicit Impl(Service& s) : svc(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler and maps exceptions to JSON error responses.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      if (e.retry_after_s() > 0) res.set_header("Retry-After", std::to_string(e.retry_after_s()));
      send_json(res, e.status(), {{"error", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const std::exception& e) {
      std::cerr << "service: " << req.method << " " << req.path << ": " << e.what() << "\n";
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  Service& svc = impl_->svc;
  httplib::Server& srv = impl_->server;

  srv.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", svc.draining() ? "draining" : "ok"}});
          }));

  srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             std::vector<std::uint8_t> png;
             std::string role = req.has_param("role") ? req.get_param_value("role") : "source";
             if (req.is_multipart_form_data()) {
               if (!req.has_file("image")) throw ServiceError(400, "multipart upload needs an 'image' part");
               png = bytes_of(req.get_file_value("image").content);
               if (req.has_file("role")) role = req.get_file_value("role").content;
             } else {
               png = bytes_of(req.body);
             }
             if (png.empty()) throw ServiceError(400, "empty upload");
             const std::string id = svc.create_session(png, role);
             send_json(res, 201, svc.session_info(id));
           }));

  srv.Get(R"(/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.session_info(req.matches[1]));
          }));

  srv.Post(R"(/sessions/([^/]+)/edits)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             json request;
             Uploads uploads;
             if (req.is_multipart_form_data()) {
               if (!req.has_file("request")) throw ServiceError(400, "multipart edit needs a 'request' part");
               for (const auto& [name, part] : req.files) {
                 if (name == "request") {
                   request = json::parse(part.content);
                 } else {
                   uploads[name] = bytes_of(part.content);
                 }
               }
             } else {
               request = json::parse(req.body);
             }
             const std::string job = svc.submit_edit(req.matches[1], request, uploads);
             send_json(res, 202, svc.job_status(job));
           }));

  srv.Get(R"(/jobs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.job_status(req.matches[1]));
          }));

  srv.Get(R"(/jobs/([^/]+)/result)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const auto png = svc.job_result(id);
            if (!png) {
              send_json(res, 202, svc.job_status(id));
              return;
            }
            const json status = svc.job_status(id);
            res.status = 200;
            res.set_header("X-Job-State", status.at("state").get<std::string>());
            res.set_content(std::string(png->begin(), png->end()), "image/png");
          }));

  srv.Get(R"(/jobs/([^/]+)/events)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            svc.job_status(id);  // 404 before the stream starts
            auto next = std::make_shared<std::size_t>(0);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [&svc, id, next](std::size_t, httplib::DataSink& sink) {
                  bool finished = false;
                  const auto events = svc.wait_events(id, *next, std::chrono::milliseconds(500), &finished);
                  for (const JobEvent& e : events) {
                    const std::string frame = "id: " + std::to_string(e.seq) + "\nevent: " +
                                              e.data.at("type").get<std::string>() + "\ndata: " + e.data.dump() +
                                              "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *next = e.seq + 1;
                  }
                  if (finished) sink.done();
                  return true;
                });
          }));
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) return false;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace hairedit::service

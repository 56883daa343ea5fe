#pragma once

#include <memory>
#include <string>

#include "hairedit/service/service.hpp"

namespace hairedit::service {

// HTTP + JSON transport over a Service.
//
//   GET  /health
//   POST /sessions                 multipart: "image" file part, optional "role"
//                                  field (source | reference); or a raw
//                                  image/png body with ?role=
//   GET  /sessions/{id}
//   POST /sessions/{id}/edits      JSON request body, or multipart with a
//                                  "request" part plus named upload parts
//   GET  /jobs/{id}
//   GET  /jobs/{id}/result         image/png once finished, else 202 + status
//   GET  /jobs/{id}/events         server-sent events until the job ends
//
// Errors are {"error": "..."} with the status from ServiceError; 409 and 503
// carry Retry-After.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free one. False when the address cannot be bound.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  // Serves until stop(); returns false on a listen failure.
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace hairedit::service

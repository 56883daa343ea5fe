#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hairedit/pipeline/pipeline.hpp"

namespace hairedit::service {

// Carries the HTTP status the transport should answer with.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message, int retry_after_s = 0)
      : std::runtime_error(message), status_(status), retry_after_s_(retry_after_s) {}
  int status() const { return status_; }
  int retry_after_s() const { return retry_after_s_; }  // 0: no Retry-After header

 private:
  int status_;
  int retry_after_s_;
};

enum class JobState { kQueued, kRunning, kDone, kFailed };
const char* to_string(JobState s);

struct JobEvent {
  std::size_t seq = 0;
  nlohmann::json data;  // {"type": "progress"|"state", ...}
};

using Uploads = std::map<std::string, std::vector<std::uint8_t>>;
using Clock = std::function<std::chrono::system_clock::time_point()>;

// Sessions, precompute and the edit job queue, independent of the transport.
//
// A source session runs inversion, FS embedding and the bald proxy once in
// the background; every edit on it reuses that state. Reference sessions
// only store an image that requests can point at with {"session": id}.
// Session files live under store_dir/<id>/ and survive restarts until the
// TTL runs out; jobs are in memory only.
class Service {
 public:
  Service(std::shared_ptr<const Engine> engine, ServiceConfig cfg, Clock clock = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // role: "source" or "reference". Undecodable or wrongly sized images are 400.
  std::string create_session(const std::vector<std::uint8_t>& png, const std::string& role = "source");
  nlohmann::json session_info(const std::string& id);
  // Validates and resolves the request synchronously, then queues it.
  // 404 unknown session, 400 bad request, 409 + Retry-After while the
  // precompute runs, 503 + Retry-After when the queue is full or draining.
  std::string submit_edit(const std::string& session_id, const nlohmann::json& request, const Uploads& uploads = {});
  nlohmann::json job_status(const std::string& id);
  // PNG of the finished edit, or of the partial image of a failed one.
  // Empty while the job has not finished.
  std::optional<std::vector<std::uint8_t>> job_result(const std::string& id);
  // Events numbered from `from` on. Waits up to `timeout` when none are
  // pending. `finished` turns true once the job is terminal and every event
  // has been handed out.
  std::vector<JobEvent> wait_events(const std::string& id, std::size_t from, std::chrono::milliseconds timeout,
                                    bool* finished);

  // Blocks until the session's precompute has ended either way.
  void wait_ready(const std::string& session_id);
  std::shared_ptr<const SourceState> source_state(const std::string& session_id);

  // Deletes sessions (files and jobs) older than the TTL. Returns the count.
  std::size_t evict_expired();

  // Stops taking work, finishes the precompute and queued jobs, joins the
  // threads. Idempotent.
  void shutdown();
  bool draining() const;

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct Session;
  struct Job;

  std::shared_ptr<Session> find_session(const std::string& id);
  std::shared_ptr<Job> find_job(const std::string& id);
  std::string new_id();
  std::filesystem::path session_dir(const std::string& id) const;
  void persist_session(const Session& s);
  void load_sessions();
  void remove_session_locked(const std::string& id);
  void precompute_loop();
  void worker_loop();
  void run_job(const std::shared_ptr<Job>& job);
  void push_event(Job& job, nlohmann::json data);

  std::shared_ptr<const Engine> engine_;
  ServiceConfig cfg_;
  Clock clock_;

  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable precompute_cv_;
  std::condition_variable ready_cv_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::deque<std::shared_ptr<Session>> precompute_queue_;
  bool stopping_ = false;
  std::uint64_t id_state_;
  std::vector<std::thread> threads_;
};

}  // namespace hairedit::service

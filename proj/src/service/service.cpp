#include "hairedit/service/service.hpp"

#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <random>

#include "hairedit/core/io.hpp"

namespace hairedit::service {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

struct Service::Session {
  std::string id;
  std::string role;
  std::chrono::system_clock::time_point created;
  std::string state;  // pending | ready | failed
  std::string error;
  Image image;
  std::vector<std::uint8_t> png;
  std::shared_ptr<const SourceState> source;
  json history = json::array();
};

struct Service::Job {
  std::string id;
  std::string session_id;
  json request;
  ResolvedRequest resolved;
  JobState state = JobState::kQueued;
  std::string stage;
  int step = 0;
  double loss = 0.0;
  json report;
  std::string error;
  std::string error_stage;
  std::vector<std::uint8_t> png;
  std::vector<JobEvent> events;
  std::condition_variable cv;
};

namespace {

constexpr int kPrecomputeRetryAfterS = 1;
constexpr int kQueueFullRetryAfterS = 5;

double to_unix(std::chrono::system_clock::time_point t) {
  return std::chrono::duration<double>(t.time_since_epoch()).count();
}

std::chrono::system_clock::time_point from_unix(double s) {
  return std::chrono::system_clock::time_point(
      std::chrono::duration_cast<std::chrono::system_clock::duration>(std::chrono::duration<double>(s)));
}

json stages_to_json(const std::vector<StageRecord>& stages) {
  json a = json::array();
  for (const StageRecord& s : stages) {
    a.push_back({{"name", s.name}, {"steps", s.steps}, {"initial_loss", s.initial_loss},
                 {"final_loss", s.final_loss}, {"flagged", s.flagged}, {"seconds", s.seconds}});
  }
  return a;
}

std::vector<StageRecord> stages_from_json(const json& a) {
  std::vector<StageRecord> out;
  for (const json& s : a) {
    out.push_back({s.at("name").get<std::string>(), s.at("steps").get<int>(), s.at("initial_loss").get<double>(),
                   s.at("final_loss").get<double>(), s.at("flagged").get<bool>(), s.at("seconds").get<double>()});
  }
  return out;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

Service::Service(std::shared_ptr<const Engine> engine, ServiceConfig cfg, Clock clock)
    : engine_(std::move(engine)), cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
  std::random_device rd;
  id_state_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  fs::create_directories(cfg_.store_dir);
  load_sessions();
  evict_expired();
  threads_.emplace_back([this] { precompute_loop(); });
  for (int i = 0; i < std::max(1, cfg_.workers); ++i) threads_.emplace_back([this] { worker_loop(); });
}

Service::~Service() { shutdown(); }

std::string Service::new_id() {
  // splitmix64 over a random start; ids only need to be unguessable-ish and unique.
  auto next = [this] {
    std::uint64_t z = (id_state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016" PRIx64 "%016" PRIx64, next(), next());
  return buf;
}

fs::path Service::session_dir(const std::string& id) const { return fs::path(cfg_.store_dir) / id; }

void Service::persist_session(const Session& s) {
  const fs::path dir = session_dir(s.id);
  fs::create_directories(dir / "results");
  json meta = {{"id", s.id}, {"role", s.role}, {"created", to_unix(s.created)}, {"state", s.state},
               {"error", s.error}, {"history", s.history}};
  if (s.source) meta["stages"] = stages_to_json(s.source->stages);
  const fs::path tmp = dir / "session.json.tmp";
  io::write_text(tmp, meta.dump(2));
  fs::rename(tmp, dir / "session.json");
}

void Service::load_sessions() {
  for (const auto& entry : fs::directory_iterator(cfg_.store_dir)) {
    if (!entry.is_directory()) continue;
    const std::string id = entry.path().filename().string();
    try {
      const json meta = json::parse(io::read_text(entry.path() / "session.json"));
      auto s = std::make_shared<Session>();
      s->id = id;
      s->role = meta.at("role").get<std::string>();
      s->created = from_unix(meta.at("created").get<double>());
      s->history = meta.value("history", json::array());
      s->png = io::read_file(entry.path() / "source.png");
      s->image = io::decode_image_png(s->png);
      s->state = "ready";
      if (s->role == "source") {
        const fs::path latent = entry.path() / "source.latent";
        if (fs::exists(latent)) {
          const io::LatentFile lf = io::read_latent_file(latent);
          require(lf.fs_feature.has_value(), ErrorKind::kDecode, "stored latent has no source feature");
          s->source = std::make_shared<const SourceState>(restore_source(
              s->image, lf.w, *lf.fs_feature, stages_from_json(meta.value("stages", json::array())), *engine_));
        } else {
          // Interrupted before the precompute finished: run it again.
          s->state = "pending";
          precompute_queue_.push_back(s);
        }
      }
      sessions_[id] = s;
    } catch (const std::exception& e) {
      std::cerr << "service: ignoring unreadable session " << id << ": " << e.what() << "\n";
    }
  }
}

std::size_t Service::evict_expired() {
  std::lock_guard lk(mu_);
  const auto now = clock_();
  const auto ttl = std::chrono::duration_cast<std::chrono::system_clock::duration>(
      std::chrono::duration<double, std::ratio<3600>>(cfg_.session_ttl_hours));
  std::vector<std::string> expired;
  for (const auto& [id, s] : sessions_) {
    if (now - s->created >= ttl && s->state != "pending") expired.push_back(id);
  }
  for (const std::string& id : expired) remove_session_locked(id);
  return expired.size();
}

void Service::remove_session_locked(const std::string& id) {
  for (auto it = jobs_.begin(); it != jobs_.end();) {
    const bool busy = it->second->state == JobState::kQueued || it->second->state == JobState::kRunning;
    if (it->second->session_id == id && !busy) {
      it = jobs_.erase(it);
    } else {
      ++it;
    }
  }
  sessions_.erase(id);
  std::error_code ec;
  fs::remove_all(session_dir(id), ec);
}

std::string Service::create_session(const std::vector<std::uint8_t>& png, const std::string& role) {
  if (role != "source" && role != "reference") throw ServiceError(400, "role must be 'source' or 'reference'");
  evict_expired();
  Image img;
  try {
    img = io::decode_image_png(png);
  } catch (const Error& e) {
    throw ServiceError(400, std::string("upload is not a readable PNG: ") + e.what());
  }
  const Shape3 out = engine_->generator().stage_shape(Stage::kOutput);
  if (role == "source" && (img.height() != out.height || img.width() != out.width)) {
    throw ServiceError(400, "source image must be " + std::to_string(out.width) + "x" + std::to_string(out.height));
  }
  auto s = std::make_shared<Session>();
  s->role = role;
  s->created = clock_();
  s->image = std::move(img);
  s->png = png;
  s->state = role == "source" ? "pending" : "ready";
  {
    std::lock_guard lk(mu_);
    if (stopping_) throw ServiceError(503, "service is shutting down", kQueueFullRetryAfterS);
    do {
      s->id = new_id();
    } while (sessions_.count(s->id) != 0);
    const fs::path dir = session_dir(s->id);
    fs::create_directories(dir / "results");
    io::write_file(dir / "source.png", png);
    persist_session(*s);
    sessions_[s->id] = s;
    if (role == "source") precompute_queue_.push_back(s);
  }
  precompute_cv_.notify_one();
  return s->id;
}

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (!valid_id(id) || it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  return it->second;
}

std::shared_ptr<Service::Job> Service::find_job(const std::string& id) {
  std::lock_guard lk(mu_);
  auto it = jobs_.find(id);
  if (!valid_id(id) || it == jobs_.end()) throw ServiceError(404, "unknown job " + id);
  return it->second;
}

json Service::session_info(const std::string& id) {
  auto s = find_session(id);
  std::lock_guard lk(mu_);
  json j = {{"id", s->id}, {"role", s->role}, {"state", s->state}, {"created", to_unix(s->created)},
            {"height", s->image.height()}, {"width", s->image.width()}, {"history", s->history}};
  if (!s->error.empty()) j["error"] = s->error;
  if (s->source) j["stages"] = stages_to_json(s->source->stages);
  return j;
}

void Service::wait_ready(const std::string& session_id) {
  auto s = find_session(session_id);
  std::unique_lock lk(mu_);
  ready_cv_.wait(lk, [&] { return s->state != "pending"; });
}

std::shared_ptr<const SourceState> Service::source_state(const std::string& session_id) {
  auto s = find_session(session_id);
  std::lock_guard lk(mu_);
  return s->source;
}

void Service::precompute_loop() {
  for (;;) {
    std::shared_ptr<Session> s;
    {
      std::unique_lock lk(mu_);
      precompute_cv_.wait(lk, [&] { return stopping_ || !precompute_queue_.empty(); });
      if (precompute_queue_.empty()) return;
      s = precompute_queue_.front();
      precompute_queue_.pop_front();
    }
    std::shared_ptr<const SourceState> state;
    std::string error;
    try {
      state = std::make_shared<const SourceState>(prepare_source(s->image, *engine_));
      io::write_latent_file(session_dir(s->id) / "source.latent", {state->w_src, state->f_src()});
    } catch (const std::exception& e) {
      error = e.what();
      std::cerr << "service: precompute for session " << s->id << " failed: " << error << "\n";
    }
    {
      std::lock_guard lk(mu_);
      s->source = state;
      s->state = state ? "ready" : "failed";
      s->error = error;
      if (sessions_.count(s->id)) persist_session(*s);
    }
    ready_cv_.notify_all();
  }
}

std::string Service::submit_edit(const std::string& session_id, const json& request, const Uploads& uploads) {
  auto s = find_session(session_id);
  {
    std::lock_guard lk(mu_);
    if (s->role != "source") throw ServiceError(400, "session " + session_id + " holds a reference image");
    if (s->state == "pending") {
      throw ServiceError(409, "session " + session_id + " is still being prepared", kPrecomputeRetryAfterS);
    }
    if (s->state == "failed") throw ServiceError(422, "session preparation failed: " + s->error);
  }

  auto job = std::make_shared<Job>();
  job->session_id = session_id;
  job->request = request;
  try {
    const EditRequest req = EditRequest::from_json(request);
    const AssetLoader loader = [&](const AssetRef& ref) -> std::vector<std::uint8_t> {
      switch (ref.source) {
        case AssetRef::Source::kUpload: {
          auto it = uploads.find(ref.name);
          require(it != uploads.end(), ErrorKind::kValidation, "no upload named '" + ref.name + "'");
          return it->second;
        }
        case AssetRef::Source::kSession: {
          auto other = find_session(ref.name);
          std::lock_guard lk(mu_);
          return other->png;
        }
        case AssetRef::Source::kPath:
          break;
      }
      fail(ErrorKind::kValidation, "file paths are not accepted by the service ('" + ref.name + "')");
    };
    job->resolved = resolve_request(req, loader);
    if (req.has_sketch() && engine_->sketch_inverter() == nullptr) {
      throw ServiceError(400, "sketch conditions need a trained sketch inverter in the config");
    }
  } catch (const ServiceError& e) {
    throw ServiceError(e.status() == 404 ? 400 : e.status(), e.what());
  } catch (const std::exception& e) {
    throw ServiceError(400, e.what());
  }

  {
    std::lock_guard lk(mu_);
    if (stopping_) throw ServiceError(503, "service is shutting down", kQueueFullRetryAfterS);
    if (static_cast<int>(queue_.size()) >= cfg_.queue_capacity) {
      throw ServiceError(503, "edit queue is full", kQueueFullRetryAfterS);
    }
    do {
      job->id = new_id();
    } while (jobs_.count(job->id) != 0);
    jobs_[job->id] = job;
    queue_.push_back(job);
    push_event(*job, {{"type", "state"}, {"state", "queued"}});
  }
  work_cv_.notify_one();
  return job->id;
}

// Caller holds mu_.
void Service::push_event(Job& job, json data) {
  job.events.push_back({job.events.size(), std::move(data)});
  job.cv.notify_all();
}

void Service::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lk(mu_);
      work_cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and drained
      job = queue_.front();
      queue_.pop_front();
      job->state = JobState::kRunning;
      push_event(*job, {{"type", "state"}, {"state", "running"}});
    }
    run_job(job);
  }
}

void Service::run_job(const std::shared_ptr<Job>& job) {
  std::shared_ptr<Session> session;
  std::shared_ptr<const SourceState> source;
  {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(job->session_id);
    if (it != sessions_.end()) {
      session = it->second;
      source = session->source;
    }
  }
  const StageProgress progress = [&](const std::string& stage, int step, double loss) {
    std::lock_guard lk(mu_);
    job->stage = stage;
    job->step = step;
    job->loss = loss;
    push_event(*job, {{"type", "progress"}, {"stage", stage}, {"step", step}, {"loss", loss}});
  };

  std::vector<std::uint8_t> png;
  json report;
  std::string error, error_stage;
  try {
    if (!session || !source) fail(ErrorKind::kUnavailable, "session " + job->session_id + " is gone");
    const EditResult out = run_edit(source->image, job->resolved, *engine_, source.get(), progress);
    png = io::encode_image_png(out.image.clamped());
    report = out.report.to_json(true);
  } catch (const StageError& e) {
    error = e.what();
    error_stage = e.stage();
    if (e.partial()) png = io::encode_image_png(e.partial()->clamped());
  } catch (const std::exception& e) {
    error = e.what();
  }

  std::lock_guard lk(mu_);
  job->png = std::move(png);
  job->report = report;
  job->error = error;
  job->error_stage = error_stage;
  job->state = error.empty() ? JobState::kDone : JobState::kFailed;
  if (session && sessions_.count(session->id)) {
    try {
      const fs::path results = session_dir(session->id) / "results";
      if (!job->png.empty()) io::write_file(results / (job->id + ".png"), job->png);
      if (job->state == JobState::kDone) io::write_text(results / (job->id + ".json"), report.dump(2));
      session->history.push_back(
          {{"job", job->id}, {"state", to_string(job->state)}, {"request", job->request}, {"completed", to_unix(clock_())}});
      persist_session(*session);
    } catch (const std::exception& e) {
      std::cerr << "service: could not store result of job " << job->id << ": " << e.what() << "\n";
    }
  }
  json ev = {{"type", "state"}, {"state", to_string(job->state)}};
  if (!error.empty()) {
    ev["error"] = error;
    if (!error_stage.empty()) ev["stage"] = error_stage;
  }
  push_event(*job, std::move(ev));
}

json Service::job_status(const std::string& id) {
  auto job = find_job(id);
  std::lock_guard lk(mu_);
  json j = {{"id", job->id}, {"session", job->session_id}, {"state", to_string(job->state)}};
  if (!job->stage.empty()) j["progress"] = {{"stage", job->stage}, {"step", job->step}, {"loss", job->loss}};
  if (job->state == JobState::kDone) j["report"] = job->report;
  if (job->state == JobState::kFailed) {
    j["error"] = job->error;
    if (!job->error_stage.empty()) j["stage"] = job->error_stage;
    j["partial"] = !job->png.empty();
  }
  return j;
}

std::optional<std::vector<std::uint8_t>> Service::job_result(const std::string& id) {
  auto job = find_job(id);
  std::lock_guard lk(mu_);
  if (job->state == JobState::kDone) return job->png;
  if (job->state == JobState::kFailed) {
    if (job->png.empty()) throw ServiceError(422, "job failed without a partial image: " + job->error);
    return job->png;
  }
  return std::nullopt;
}

std::vector<JobEvent> Service::wait_events(const std::string& id, std::size_t from, std::chrono::milliseconds timeout,
                                           bool* finished) {
  auto job = find_job(id);
  std::unique_lock lk(mu_);
  auto terminal = [&] { return job->state == JobState::kDone || job->state == JobState::kFailed; };
  job->cv.wait_for(lk, timeout, [&] { return job->events.size() > from || terminal(); });
  std::vector<JobEvent> out;
  for (std::size_t i = from; i < job->events.size(); ++i) out.push_back(job->events[i]);
  if (finished) *finished = terminal();
  return out;
}

void Service::shutdown() {
  {
    std::lock_guard lk(mu_);
    if (stopping_ && threads_.empty()) return;
    stopping_ = true;
  }
  work_cv_.notify_all();
  precompute_cv_.notify_all();
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
  std::lock_guard lk(mu_);
  threads_.clear();
}

bool Service::draining() const {
  std::lock_guard lk(mu_);
  return stopping_;
}

}  // namespace hairedit::service

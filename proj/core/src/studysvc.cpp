#include "ifqa/studysvc.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ifqa/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ifqa {

void StudyConfig::validate() const {
  if (target_raters < 1) throw ConfigError("target_raters must be at least 1");
}

bool StudySnapshot::answered(const std::string& rater, const std::string& sample) const {
  const auto it = answered_by_rater.find(rater);
  if (it == answered_by_rater.end()) return false;
  return std::find(it->second.begin(), it->second.end(), sample) != it->second.end();
}

namespace {

std::vector<StudySample> discover(const StudyConfig& cfg) {
  if (!fs::is_directory(cfg.samples_root)) throw NotFoundError("study not found: " + cfg.samples_root.string());
  std::vector<StudySample> out;
  for (const auto& e : fs::directory_iterator(cfg.samples_root)) {
    if (!e.is_directory()) continue;
    StudySample s;
    s.id = e.path().filename().string();
    if (s.id.empty() || s.id.front() == '.') continue;
    s.dir = e.path();
    const fs::path meta = s.dir / "sample.json";
    if (fs::exists(meta)) {
      std::ifstream in(meta);
      try {
        const json j = json::parse(in);
        if (j.contains("reference")) s.reference_id = j.at("reference").get<std::string>();
      } catch (const json::exception& ex) {
        throw ConfigError(meta.string() + ": " + ex.what());
      }
    }
    if (!s.reference_id && fs::exists(s.dir / "reference.png")) s.reference_id = "reference";
    for (const auto& f : fs::directory_iterator(s.dir)) {
      const std::string name = f.path().filename().string();
      if (!f.is_regular_file() || !name.ends_with(".png") || name.ends_with(".mask.png") || name.front() == '.') continue;
      const std::string id = f.path().stem().string();
      if (cfg.exclude_reference && s.reference_id && id == *s.reference_id) continue;
      s.image_ids.push_back(id);
    }
    std::sort(s.image_ids.begin(), s.image_ids.end());
    if (s.image_ids.size() >= 2) out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const StudySample& a, const StudySample& b) { return a.id < b.id; });
  if (out.empty()) throw ConfigError("no sample with at least two images under " + cfg.samples_root.string());
  return out;
}

bool valid_token(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c > 0x20 && c < 0x7f; });
}

}  // namespace

StudyService::StudyService(StudyConfig config) : config_(std::move(config)), shuffle_rng_(mix_seed(config_.seed)) {
  config_.validate();
  samples_ = discover(config_);
  for (std::size_t i = 0; i < samples_.size(); ++i) index_[samples_[i].id] = i;
  current_ = std::make_shared<const StudySnapshot>();
  replay();
  if (!config_.log_path.empty()) {
    if (config_.log_path.has_parent_path()) fs::create_directories(config_.log_path.parent_path());
    log_ = std::fopen(config_.log_path.c_str(), "a");
    if (!log_) throw IoError("cannot open response log " + config_.log_path.string());
  }
}

StudyService::~StudyService() {
  if (log_) std::fclose(log_);
}

const StudySample& StudyService::sample(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown sample '" + id + "'");
  return samples_[it->second];
}

std::shared_ptr<const StudySnapshot> StudyService::snapshot() const { return std::atomic_load(&current_); }

std::optional<std::string> StudyService::check_ordering(const StudySample& s,
                                                        const std::vector<std::string>& ordering) const {
  std::set<std::string> seen;
  for (const auto& id : ordering) {
    if (!seen.insert(id).second) return "ordering: image id '" + id + "' appears more than once";
    if (!std::binary_search(s.image_ids.begin(), s.image_ids.end(), id)) {
      return "ordering: image id '" + id + "' is not part of sample '" + s.id + "'";
    }
  }
  if (ordering.size() != s.image_ids.size()) {
    return "ordering: expected " + std::to_string(s.image_ids.size()) + " ids, got " + std::to_string(ordering.size());
  }
  return std::nullopt;
}

void StudyService::apply(StudySnapshot& next, RankingRecord record) const {
  ++next.coverage[record.sample_id];
  next.answered_by_rater[record.rater_id].push_back(record.sample_id);
  next.log.push_back(std::make_shared<const RankingRecord>(std::move(record)));
}

void StudyService::replay() {
  if (config_.log_path.empty() || !fs::exists(config_.log_path)) return;
  std::ifstream in(config_.log_path);
  if (!in) throw IoError("cannot read response log " + config_.log_path.string());
  StudySnapshot next;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      RankingRecord r = RankingRecord::from_json(line);
      const auto it = index_.find(r.sample_id);
      if (it == index_.end() || check_ordering(samples_[it->second], r.ordering) ||
          next.answered(r.rater_id, r.sample_id)) {
        ++replay_skipped_;
        continue;
      }
      apply(next, std::move(r));
    } catch (const ValidationError&) {
      ++replay_skipped_;
    }
  }
  std::atomic_store(&current_, std::shared_ptr<const StudySnapshot>(std::make_shared<StudySnapshot>(std::move(next))));
}

Presentation StudyService::next_assignment(const std::string& rater) {
  if (!valid_token(rater)) throw ValidationError("rater: token must be 1-128 printable characters");
  const auto snap = snapshot();
  std::lock_guard lock(assign_);

  Presentation p;
  p.total = samples_.size();
  const auto answered = snap->answered_by_rater.find(rater);
  p.answered = answered == snap->answered_by_rater.end() ? 0 : answered->second.size();

  const StudySample* chosen = nullptr;
  const auto pend = pending_.find(rater);
  if (pend != pending_.end() && !snap->answered(rater, pend->second)) {
    chosen = &samples_[index_.at(pend->second)];
  } else {
    // Outstanding assignments of other raters count as coverage so that
    // concurrent raters spread over samples.
    std::map<std::string, std::size_t> load = snap->coverage;
    for (const auto& [other, sid] : pending_) {
      if (other != rater && !snap->answered(other, sid)) ++load[sid];
    }
    std::size_t best = 0;
    for (const auto& s : samples_) {
      if (snap->answered(rater, s.id)) continue;
      const std::size_t c = load[s.id];
      if (!chosen || c < best) {
        chosen = &s;
        best = c;
      }
    }
  }
  if (!chosen) {
    pending_.erase(rater);
    p.done = true;
    return p;
  }
  pending_[rater] = chosen->id;
  p.sample_id = chosen->id;
  p.image_ids = chosen->image_ids;
  for (std::size_t i = p.image_ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(shuffle_rng_, 0, static_cast<std::int64_t>(i)));
    std::swap(p.image_ids[i - 1], p.image_ids[j]);
  }
  return p;
}

std::size_t StudyService::submit_response(const std::string& rater, const std::string& sample_id,
                                          const std::vector<std::string>& ordering) {
  if (!valid_token(rater)) throw ValidationError("rater: token must be 1-128 printable characters");
  const StudySample& s = sample(sample_id);
  if (auto problem = check_ordering(s, ordering)) throw ValidationError(*problem);

  std::lock_guard lock(writer_);
  const auto snap = snapshot();
  if (snap->answered(rater, sample_id)) {
    throw ConflictError("rater '" + rater + "' already answered sample '" + sample_id + "'");
  }
  RankingRecord record{sample_id, rater, ordering};
  if (log_) {
    const std::string line = record.to_json() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() || std::fflush(log_) != 0 ||
        ::fsync(fileno(log_)) != 0) {
      throw IoError("cannot append to response log " + config_.log_path.string());
    }
  }
  auto next = std::make_shared<StudySnapshot>(*snap);
  apply(*next, std::move(record));
  const std::size_t count = next->coverage[sample_id];
  std::atomic_store(&current_, std::shared_ptr<const StudySnapshot>(std::move(next)));
  {
    std::lock_guard alock(assign_);
    const auto it = pending_.find(rater);
    if (it != pending_.end() && it->second == sample_id) pending_.erase(it);
  }
  return count;
}

std::vector<SampleResult> results_from_log(const std::vector<StudySample>& samples,
                                           const std::vector<RankingRecord>& log, int target_raters,
                                           const std::optional<std::string>& sample_id) {
  std::vector<SampleResult> out;
  bool known = !sample_id;
  for (const auto& s : samples) {
    if (sample_id && s.id != *sample_id) continue;
    known = true;
    std::vector<RankingRecord> group;
    std::set<std::string> raters;
    for (const auto& r : log) {
      if (r.sample_id == s.id && raters.insert(r.rater_id).second) group.push_back(r);
    }
    if (group.empty()) continue;
    SampleResult res;
    res.rank = weighted_rank(group, s.image_ids);
    res.rank.sample_id = s.id;
    res.coverage = res.rank.raters;
    res.target = target_raters;
    res.complete = res.coverage >= static_cast<std::size_t>(target_raters);
    out.push_back(std::move(res));
  }
  if (!known) throw NotFoundError("unknown sample '" + *sample_id + "'");
  if (out.empty()) throw EmptyScopeError(sample_id ? "no responses for sample '" + *sample_id + "'" : "no responses yet");
  return out;
}

std::vector<SampleResult> StudyService::results(const std::optional<std::string>& sample_id) const {
  const auto snap = snapshot();
  std::vector<RankingRecord> log;
  log.reserve(snap->log.size());
  for (const auto& r : snap->log) log.push_back(*r);
  return results_from_log(samples_, log, config_.target_raters, sample_id);
}

std::string results_to_json(const std::vector<SampleResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"sample_id", r.rank.sample_id},
                   {"raters", r.rank.raters},
                   {"target", r.target},
                   {"complete", r.complete},
                   {"scores", r.rank.scores},
                   {"ordering", r.rank.ordering}});
  }
  return json{{"results", arr}}.dump();
}

std::string presentation_to_json(const Presentation& p) {
  json j{{"done", p.done}, {"answered", p.answered}, {"total", p.total}};
  if (!p.done) {
    j["sample_id"] = p.sample_id;
    json images = json::array();
    for (const auto& id : p.image_ids) {
      images.push_back({{"id", id}, {"url", "/api/image/" + p.sample_id + "/" + id}});
    }
    j["images"] = images;
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

struct StudyServer::Impl {
  StudyService& service;
  httplib::Server server;
  explicit Impl(StudyService& s) : service(s) {}
};

namespace {

void send_error(httplib::Response& res, const Error& e) {
  int status = 500;
  switch (e.kind()) {
    case ErrorKind::NotFound: status = 404; break;
    case ErrorKind::Conflict: status = 409; break;
    case ErrorKind::EmptyScope: status = 404; break;
    default: status = e.is_validation() ? 400 : 500;
  }
  res.status = status;
  res.set_content(json{{"error", to_string(e.kind())}, {"detail", e.what()}}.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(json{{"error", "internal"}, {"detail", e.what()}}.dump(), "application/json");
  }
}

}  // namespace

StudyServer::StudyServer(StudyService& service, std::optional<fs::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  StudyService* svc = &service;

  srv.Get("/api/health", [svc](const httplib::Request&, httplib::Response& res) {
    const auto snap = svc->snapshot();
    res.set_content(json{{"status", "ok"}, {"samples", svc->samples().size()}, {"responses", snap->log.size()}}.dump(),
                    "application/json");
  });

  srv.Get("/api/assignment", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("rater")) throw ValidationError("rater: query parameter is required");
      res.set_content(presentation_to_json(svc->next_assignment(req.get_param_value("rater"))), "application/json");
    });
  });

  srv.Post("/api/response", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        throw ValidationError(std::string("body: ") + e.what());
      }
      auto field = [&](const char* name) -> const json& {
        if (!body.is_object() || !body.contains(name)) throw ValidationError(std::string(name) + ": field is required");
        return body.at(name);
      };
      const json& rater = field("rater");
      const json& sample = field("sample_id");
      const json& ordering = field("ordering");
      if (!rater.is_string()) throw ValidationError("rater: must be a string");
      if (!sample.is_string()) throw ValidationError("sample_id: must be a string");
      if (!ordering.is_array() || !std::all_of(ordering.begin(), ordering.end(), [](const json& v) { return v.is_string(); })) {
        throw ValidationError("ordering: must be an array of strings");
      }
      const std::size_t count = svc->submit_response(rater.get<std::string>(), sample.get<std::string>(),
                                                     ordering.get<std::vector<std::string>>());
      res.set_content(json{{"ok", true}, {"sample_id", sample}, {"responses", count}}.dump(), "application/json");
    });
  });

  srv.Get("/api/results", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::string> scope;
      if (req.has_param("sample")) scope = req.get_param_value("sample");
      res.set_content(results_to_json(svc->results(scope)), "application/json");
    });
  });

  srv.Get(R"(/api/image/([^/]+)/([^/]+))", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const StudySample& s = svc->sample(req.matches[1]);
      const std::string id = req.matches[2];
      if (!std::binary_search(s.image_ids.begin(), s.image_ids.end(), id)) {
        throw NotFoundError("unknown image '" + id + "'");
      }
      std::ifstream in(s.dir / (id + ".png"), std::ios::binary);
      if (!in) throw IoError("cannot read image '" + id + "'");
      std::ostringstream bytes;
      bytes << in.rdbuf();
      res.set_header("Cache-Control", "no-store");
      res.set_content(bytes.str(), "image/png");
    });
  });

  if (ui_dir) {
    if (!srv.set_mount_point("/", ui_dir->string())) throw NotFoundError("ui directory not found: " + ui_dir->string());
  }
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void StudyServer::serve() { impl_->server.listen_after_bind(); }

void StudyServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace ifqa

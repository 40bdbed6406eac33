#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ifqa/evalstats.hpp"
#include "ifqa/random.hpp"

namespace ifqa {

struct StudyConfig {
  /// `<root>/<sample_id>/<image_id>.png`
  std::filesystem::path samples_root;
  /// Append-only JSONL response log; replayed on start when it exists.
  std::filesystem::path log_path;
  int target_raters = 30;
  /// Seeds the presentation shuffles; every presentation draws a fresh order.
  std::uint64_t seed = 0;
  /// Hide the reference image: the id `reference`, or the id named by the
  /// `reference` key of an optional `<sample>/sample.json`.
  bool exclude_reference = true;

  void validate() const;
};

struct StudySample {
  std::string id;
  std::filesystem::path dir;
  /// Sorted, reference excluded when configured.
  std::vector<std::string> image_ids;
  std::optional<std::string> reference_id;
};

struct Presentation {
  bool done = false;
  std::string sample_id;
  /// Freshly shuffled for every call.
  std::vector<std::string> image_ids;
  std::size_t answered = 0;
  std::size_t total = 0;
};

struct SampleResult {
  WeightedRank rank;
  std::size_t coverage = 0;
  int target = 0;
  bool complete = false;
};

/// Aggregate state at one point of the log. Immutable once published.
struct StudySnapshot {
  std::vector<std::shared_ptr<const RankingRecord>> log;
  std::map<std::string, std::size_t> coverage;
  std::map<std::string, std::vector<std::string>> answered_by_rater;

  bool answered(const std::string& rater, const std::string& sample) const;
};

class StudyService {
 public:
  /// Throws NotFoundError when the samples root does not exist and
  /// ConfigError when it holds no usable sample.
  explicit StudyService(StudyConfig config);
  ~StudyService();

  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  const StudyConfig& config() const { return config_; }
  const std::vector<StudySample>& samples() const { return samples_; }
  const StudySample& sample(const std::string& id) const;

  /// Least-covered sample the rater has not answered yet. Repeated calls
  /// before answering return the same sample in a new order.
  Presentation next_assignment(const std::string& rater);

  /// Returns the new response count of the sample. Throws ValidationError for
  /// a malformed ordering, NotFoundError for an unknown sample and
  /// ConflictError when the rater already answered it.
  std::size_t submit_response(const std::string& rater, const std::string& sample_id,
                              const std::vector<std::string>& ordering);

  /// One entry per sample with at least one response, or only `sample_id`.
  /// Throws EmptyScopeError when the scope has no response.
  std::vector<SampleResult> results(const std::optional<std::string>& sample_id = std::nullopt) const;

  std::shared_ptr<const StudySnapshot> snapshot() const;

  /// Records that could not be replayed from an existing log.
  std::size_t replay_skipped() const { return replay_skipped_; }

 private:
  void replay();
  void apply(StudySnapshot& next, RankingRecord record) const;
  std::optional<std::string> check_ordering(const StudySample& s, const std::vector<std::string>& ordering) const;

  StudyConfig config_;
  std::vector<StudySample> samples_;
  std::map<std::string, std::size_t> index_;

  std::shared_ptr<const StudySnapshot> current_;
  std::mutex writer_;
  std::FILE* log_ = nullptr;

  std::mutex assign_;
  std::map<std::string, std::string> pending_;
  Rng shuffle_rng_;
  std::size_t replay_skipped_ = 0;
};

/// Aggregates a response log from scratch, as `results` would after replay.
std::vector<SampleResult> results_from_log(const std::vector<StudySample>& samples,
                                           const std::vector<RankingRecord>& log, int target_raters,
                                           const std::optional<std::string>& sample_id = std::nullopt);

std::string results_to_json(const std::vector<SampleResult>& results);
std::string presentation_to_json(const Presentation& p);

/// HTTP front end. Endpoints:
///   GET  /api/health
///   GET  /api/assignment?rater=<token>
///   POST /api/response   {"rater", "sample_id", "ordering": [...]}
///   GET  /api/results[?sample=<id>]
///   GET  /api/image/<sample>/<image>
/// and static files from `ui_dir` at `/` when given.
class StudyServer {
 public:
  StudyServer(StudyService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~StudyServer();

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ifqa

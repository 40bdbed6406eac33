#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ifqa {

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

/// 1-based ranks, ties receive the average of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman: Pearson correlation of average ranks. Throws
/// UndefinedCorrelationError when either input is constant.
double srcc(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b.
double krcc(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Human rankings
// ---------------------------------------------------------------------------

/// One rater's ordering of one sample; ordering[0] is the most realistic.
struct RankingRecord {
  std::string sample_id;
  std::string rater_id;
  std::vector<std::string> ordering;

  std::string to_json() const;
  /// Throws ValidationError on malformed JSON or missing fields.
  static RankingRecord from_json(const std::string& line);
};

struct RejectedRecord {
  std::size_t index = 0;
  std::string reason;
};

struct WeightedRank {
  std::string sample_id;
  /// Average weight per image; weight of rank k among n images is n + 1 - k.
  std::map<std::string, double> scores;
  /// Descending score, ties broken by ascending image id.
  std::vector<std::string> ordering;
  std::size_t raters = 0;
  std::vector<RejectedRecord> rejected;
};

/// Aggregates responses for one sample. The image set is taken from the
/// first well-formed record unless `image_ids` is given; records that are not
/// permutations of it are rejected with a reason.
WeightedRank weighted_rank(std::span<const RankingRecord> responses,
                           std::optional<std::vector<std::string>> image_ids = std::nullopt);

/// Groups records by sample id (sorted) and aggregates each group.
std::vector<WeightedRank> weighted_ranks_by_sample(std::span<const RankingRecord> responses);

std::vector<RankingRecord> read_rankings_jsonl(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

enum class Polarity { HigherBetter, LowerBetter };

/// Scores of one metric keyed by `<sample_id>/<image_id>`.
struct MetricScores {
  std::string name;
  Polarity polarity = Polarity::HigherBetter;
  std::map<std::string, double> scores;
};

/// Parses `# polarity: higher|lower` (optional, default higher) and
/// `# name: <metric>` comment headers, a column header line, then
/// `id,score` rows. Rows with an empty score are skipped.
MetricScores read_metric_csv(const std::filesystem::path& path);

struct SampleSet {
  std::string sample_id;
  std::vector<std::string> image_ids;
};

enum class CorrelationMode {
  /// Correlate within each sample, then average over samples.
  PerSample,
  /// Pool every (metric, human) pair across samples into one correlation.
  Pooled,
};

struct BenchmarkRow {
  std::string metric;
  double srcc = 0;
  double krcc = 0;
  std::size_t samples_used = 0;
  std::size_t samples_excluded = 0;
};

/// Correlates each metric against the human weighted scores, with metric
/// polarity aligned so that larger always means more realistic. Rows are
/// sorted by descending SRCC, then name.
std::vector<BenchmarkRow> benchmark(std::span<const SampleSet> samples, std::span<const WeightedRank> human,
                                    std::span<const MetricScores> metrics,
                                    CorrelationMode mode = CorrelationMode::PerSample);

std::string render_table_csv(std::span<const BenchmarkRow> rows);
std::string render_table_text(std::span<const BenchmarkRow> rows);

}  // namespace ifqa

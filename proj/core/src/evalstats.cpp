#include "ifqa/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ifqa/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ifqa {

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    // Ranks i+1 .. j+1 share their mean.
    const double r = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("correlation inputs differ in length");
  if (x.size() < 2) throw ParameterError("correlation needs at least two items");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ParameterError("correlation inputs must be finite");
  }
}

}  // namespace

double srcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  if (vx == 0 || vy == 0) throw UndefinedCorrelationError("spearman correlation undefined for a constant input");
  return std::clamp(cov / std::sqrt(vx * vy), -1.0, 1.0);
}

double krcc(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  std::int64_t concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) ++ties_x;
      if (dy == 0) ++ties_y;
      if (dx == 0 || dy == 0) continue;
      if ((dx > 0) == (dy > 0)) ++concordant;
      else ++discordant;
    }
  }
  const auto pairs = static_cast<std::int64_t>(n * (n - 1) / 2);
  const auto denom = static_cast<double>(pairs - ties_x) * static_cast<double>(pairs - ties_y);
  if (denom == 0) throw UndefinedCorrelationError("kendall correlation undefined for a constant input");
  return std::clamp(static_cast<double>(concordant - discordant) / std::sqrt(denom), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rankings
// ---------------------------------------------------------------------------

std::string RankingRecord::to_json() const {
  return json{{"sample_id", sample_id}, {"rater", rater_id}, {"ordering", ordering}}.dump();
}

RankingRecord RankingRecord::from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    RankingRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.rater_id = j.at("rater").get<std::string>();
    r.ordering = j.at("ordering").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ranking record: ") + e.what());
  }
}

namespace {

std::optional<std::string> permutation_problem(const std::vector<std::string>& ordering,
                                               const std::vector<std::string>& ids) {
  std::set<std::string> seen;
  for (const auto& id : ordering) {
    if (!seen.insert(id).second) return "image id '" + id + "' appears more than once";
  }
  const std::set<std::string> expected(ids.begin(), ids.end());
  for (const auto& id : ordering) {
    if (!expected.count(id)) return "unknown image id '" + id + "'";
  }
  if (ordering.size() != ids.size()) {
    return "ordering has " + std::to_string(ordering.size()) + " ids, expected " + std::to_string(ids.size());
  }
  return std::nullopt;
}

}  // namespace

WeightedRank weighted_rank(std::span<const RankingRecord> responses, std::optional<std::vector<std::string>> image_ids) {
  WeightedRank out;
  if (!responses.empty()) out.sample_id = responses.front().sample_id;

  std::vector<std::string> ids;
  if (image_ids) {
    ids = *image_ids;
  } else {
    for (const auto& r : responses) {
      const std::set<std::string> uniq(r.ordering.begin(), r.ordering.end());
      if (!r.ordering.empty() && uniq.size() == r.ordering.size()) {
        ids = r.ordering;
        break;
      }
    }
  }

  const auto n = static_cast<std::int64_t>(ids.size());
  std::map<std::string, std::int64_t> totals;
  for (const auto& id : ids) totals[id] = 0;
  std::set<std::string> raters_seen;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    if (r.sample_id != out.sample_id) {
      out.rejected.push_back({i, "record belongs to sample '" + r.sample_id + "'"});
      continue;
    }
    if (auto problem = permutation_problem(r.ordering, ids)) {
      out.rejected.push_back({i, *problem});
      continue;
    }
    for (std::int64_t k = 0; k < n; ++k) totals[r.ordering[static_cast<std::size_t>(k)]] += n - k;
    ++out.raters;
  }
  if (out.raters == 0) return out;

  // Integer totals keep the averages exact functions of the response multiset.
  for (const auto& [id, total] : totals) {
    out.scores[id] = static_cast<double>(total) / static_cast<double>(out.raters);
  }
  out.ordering = ids;
  std::sort(out.ordering.begin(), out.ordering.end(), [&](const std::string& a, const std::string& b) {
    const auto ta = totals[a], tb = totals[b];
    return ta != tb ? ta > tb : a < b;
  });
  return out;
}

std::vector<WeightedRank> weighted_ranks_by_sample(std::span<const RankingRecord> responses) {
  std::map<std::string, std::vector<RankingRecord>> groups;
  for (const auto& r : responses) groups[r.sample_id].push_back(r);
  std::vector<WeightedRank> out;
  for (const auto& [id, group] : groups) out.push_back(weighted_rank(group));
  return out;
}

std::vector<RankingRecord> read_rankings_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<RankingRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(RankingRecord::from_json(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric files
// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

MetricScores read_metric_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  MetricScores m;
  m.name = path.stem().string();
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(body.substr(0, colon)), value = trim(body.substr(colon + 1));
      if (key == "polarity") {
        if (value == "higher") m.polarity = Polarity::HigherBetter;
        else if (value == "lower") m.polarity = Polarity::LowerBetter;
        else throw ValidationError(path.string() + ": polarity must be 'higher' or 'lower'");
      } else if (key == "name") {
        m.name = value;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected id,score");
    const std::string id = trim(line.substr(0, comma)), value = trim(line.substr(comma + 1));
    if (value.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
      m.scores[id] = v;
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": score '" + value + "' is not a number");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

std::vector<BenchmarkRow> benchmark(std::span<const SampleSet> samples, std::span<const WeightedRank> human,
                                    std::span<const MetricScores> metrics, CorrelationMode mode) {
  std::map<std::string, const WeightedRank*> by_sample;
  for (const auto& h : human) by_sample[h.sample_id] = &h;

  std::vector<BenchmarkRow> rows;
  for (const auto& metric : metrics) {
    const double sign = metric.polarity == Polarity::HigherBetter ? 1.0 : -1.0;
    BenchmarkRow row;
    row.metric = metric.name;
    double sum_s = 0, sum_k = 0;
    std::vector<double> pooled_x, pooled_y;
    for (const auto& sample : samples) {
      const auto hit = by_sample.find(sample.sample_id);
      if (hit == by_sample.end() || hit->second->raters == 0) {
        ++row.samples_excluded;
        continue;
      }
      std::vector<double> x, y;
      bool complete = true;
      for (const auto& image : sample.image_ids) {
        const auto ms = metric.scores.find(sample.sample_id + "/" + image);
        const auto hs = hit->second->scores.find(image);
        if (ms == metric.scores.end() || hs == hit->second->scores.end()) {
          complete = false;
          break;
        }
        x.push_back(sign * ms->second);
        y.push_back(hs->second);
      }
      if (!complete || x.size() < 2) {
        ++row.samples_excluded;
        continue;
      }
      if (mode == CorrelationMode::Pooled) {
        pooled_x.insert(pooled_x.end(), x.begin(), x.end());
        pooled_y.insert(pooled_y.end(), y.begin(), y.end());
        ++row.samples_used;
        continue;
      }
      try {
        const double s = srcc(x, y);
        const double k = krcc(x, y);
        sum_s += s;
        sum_k += k;
        ++row.samples_used;
      } catch (const UndefinedCorrelationError&) {
        ++row.samples_excluded;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (mode == CorrelationMode::Pooled) {
      try {
        row.srcc = srcc(pooled_x, pooled_y);
        row.krcc = krcc(pooled_x, pooled_y);
      } catch (const Error&) {
        row.srcc = row.krcc = nan;
      }
    } else if (row.samples_used > 0) {
      row.srcc = sum_s / static_cast<double>(row.samples_used);
      row.krcc = sum_k / static_cast<double>(row.samples_used);
    } else {
      row.srcc = row.krcc = nan;
    }
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    const bool an = std::isnan(a.srcc), bn = std::isnan(b.srcc);
    if (an != bn) return bn;
    if (!an && a.srcc != b.srcc) return a.srcc > b.srcc;
    return a.metric < b.metric;
  });
  return rows;
}

namespace {

std::string fmt4(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_table_csv(std::span<const BenchmarkRow> rows) {
  std::ostringstream os;
  os << "metric,srcc,krcc,samples,excluded\n";
  for (const auto& r : rows) {
    os << r.metric << ',' << fmt4(r.srcc) << ',' << fmt4(r.krcc) << ',' << r.samples_used << ','
       << r.samples_excluded << '\n';
  }
  return os.str();
}

std::string render_table_text(std::span<const BenchmarkRow> rows) {
  std::size_t w = std::string("Metric").size();
  for (const auto& r : rows) w = std::max(w, r.metric.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8s  %8s\n", static_cast<int>(w), "Metric", "SRCC", "KRCC", "Samples",
                "Excluded");
  os << buf << std::string(w + 42, '-') << '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s  %8zu  %8zu\n", static_cast<int>(w), r.metric.c_str(),
                  fmt4(r.srcc).c_str(), fmt4(r.krcc).c_str(), r.samples_used, r.samples_excluded);
    os << buf;
  }
  return os.str();
}

}  // namespace ifqa

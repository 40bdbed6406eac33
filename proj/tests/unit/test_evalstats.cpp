#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ifqa/errors.hpp"
#include "ifqa/evalstats.hpp"
#include "test_support.hpp"

using namespace ifqa;
using namespace ifqa::testing;

namespace {

RankingRecord rec(std::string sample, std::string rater, std::vector<std::string> ordering) {
  return RankingRecord{std::move(sample), std::move(rater), std::move(ordering)};
}

const std::vector<std::string> kSix = {"a", "b", "c", "d", "e", "f"};

}  // namespace

TEST(Srcc, HandDerivedValue) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  EXPECT_EQ(srcc(x, y), 0.8);
}

TEST(Krcc, HandDerivedValue) {
  const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
  EXPECT_EQ(krcc(x, y), 1.0 / 3.0);
}

TEST(RankCorrelation, IdentityAndReversal) {
  const std::vector<double> x{0.3, -1, 7, 2.5, 4};
  std::vector<double> r(x);
  for (double& v : r) v = -v;
  EXPECT_EQ(srcc(x, x), 1.0);
  EXPECT_EQ(krcc(x, x), 1.0);
  EXPECT_EQ(srcc(x, r), -1.0);
  EXPECT_EQ(krcc(x, r), -1.0);
}

TEST(RankCorrelation, Preconditions) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, c{5, 5, 5}, one{1};
  const std::vector<double> nan{1, std::nan(""), 3};
  EXPECT_THROW(srcc(a, b), ParameterError);
  EXPECT_THROW(krcc(one, one), ParameterError);
  EXPECT_THROW(srcc(a, nan), ParameterError);
  EXPECT_THROW(srcc(a, c), UndefinedCorrelationError);
  EXPECT_THROW(krcc(c, a), UndefinedCorrelationError);
}

TEST(AverageRanks, MidRanksForTies) {
  const std::vector<double> v{10, 20, 20, 5, 20};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{2, 4, 4, 1, 4}));
}

TEST(RankCorrelation, AllPermutationsOfSixMatchOracles) {
  std::vector<double> ref{1, 2, 3, 4, 5, 6}, p(ref);
  int count = 0;
  do {
    ++count;
    EXPECT_EQ(srcc(ref, p), oracle_srcc_distinct(ref, p));
    EXPECT_EQ(krcc(ref, p), oracle_krcc(ref, p));
  } while (std::next_permutation(p.begin(), p.end()));
  EXPECT_EQ(count, 720);
}

TEST(RankCorrelation, TiedInputsMatchOracles) {
  using Pair = std::pair<std::vector<double>, std::vector<double>>;
  const int bad = for_all<Pair>(
      11, 500,
      [](Rng& rng) {
        const int n = static_cast<int>(uniform_int(rng, 2, 12));
        Pair p{random_scores(rng, n, 4), random_scores(rng, n, 4)};
        // Keep both sides non-constant.
        p.first[0] = 0;
        p.first[1] = 5;
        p.second[0] = 7;
        p.second[1] = -1;
        return p;
      },
      [](const Pair& p) {
        return std::abs(srcc(p.first, p.second) - oracle_srcc(p.first, p.second)) <= 1e-12 &&
               std::abs(krcc(p.first, p.second) - oracle_krcc(p.first, p.second)) <= 1e-12;
      });
  EXPECT_EQ(bad, -1);
}

TEST(RankCorrelation, InvariantUnderMonotoneTransforms) {
  using Pair = std::pair<std::vector<double>, std::vector<double>>;
  const int bad = for_all<Pair>(
      12, 300,
      [](Rng& rng) {
        const int n = static_cast<int>(uniform_int(rng, 3, 15));
        return Pair{random_scores(rng, n), random_scores(rng, n, 5)};
      },
      [](const Pair& p) {
        std::vector<double> t(p.first), neg(p.first);
        for (double& v : t) v = std::exp(v) * 3 + 1;
        for (double& v : neg) v = -v;
        std::vector<double> y = p.second;
        if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] += 1;
        return srcc(t, y) == srcc(p.first, y) && krcc(t, y) == krcc(p.first, y) &&
               std::abs(srcc(neg, y) + srcc(p.first, y)) <= 1e-12 &&
               std::abs(krcc(neg, y) + krcc(p.first, y)) <= 1e-12 && std::abs(srcc(p.first, y)) <= 1.0 &&
               std::abs(krcc(p.first, y)) <= 1.0;
      });
  EXPECT_EQ(bad, -1);
}

TEST(WeightedRank, SingleRater) {
  const std::vector<RankingRecord> r{rec("s", "u", kSix)};
  const WeightedRank w = weighted_rank(r);
  EXPECT_EQ(w.raters, 1u);
  for (std::size_t i = 0; i < kSix.size(); ++i) EXPECT_EQ(w.scores.at(kSix[i]), 6.0 - static_cast<double>(i));
  EXPECT_EQ(w.ordering, kSix);
}

TEST(WeightedRank, ThreeRatersMatchFormula) {
  const std::vector<RankingRecord> r{
      rec("s", "u1", {"a", "b", "c", "d", "e", "f"}),
      rec("s", "u2", {"c", "a", "b", "f", "e", "d"}),
      rec("s", "u3", {"b", "c", "a", "d", "f", "e"}),
  };
  // rank_of_image[rater][image], images a..f.
  const std::vector<std::vector<int>> ranks{{1, 2, 3, 4, 5, 6}, {2, 3, 1, 6, 5, 4}, {3, 1, 2, 4, 6, 5}};
  const auto expected = oracle_weighted_scores(ranks);
  const WeightedRank w = weighted_rank(r);
  for (std::size_t i = 0; i < kSix.size(); ++i) EXPECT_EQ(w.scores.at(kSix[i]), expected[i]);
  // a, b and c tie at 5; the tie falls back to id order.
  EXPECT_EQ(w.ordering, (std::vector<std::string>{"a", "b", "c", "d", "f", "e"}));
  EXPECT_EQ(w.scores.at("d"), 7.0 / 3.0);
}

TEST(WeightedRank, RejectsMalformedRecords) {
  const std::vector<RankingRecord> r{
      rec("s", "u1", kSix),
      rec("s", "u2", {"a", "a", "b", "c", "d", "e"}),
      rec("s", "u3", {"a", "b", "c", "d", "e"}),
      rec("s", "u4", {"a", "b", "c", "d", "e", "z"}),
      rec("t", "u5", kSix),
  };
  const WeightedRank w = weighted_rank(r);
  EXPECT_EQ(w.raters, 1u);
  ASSERT_EQ(w.rejected.size(), 4u);
  for (const auto& x : w.rejected) EXPECT_FALSE(x.reason.empty());
  EXPECT_EQ(w.rejected[0].index, 1u);
}

TEST(WeightedRank, DuplicatingResponsesKeepsOrdering) {
  const int bad = for_all<std::vector<RankingRecord>>(
      13, 100,
      [](Rng& rng) {
        std::vector<RankingRecord> out;
        const int raters = static_cast<int>(uniform_int(rng, 1, 8));
        for (int i = 0; i < raters; ++i) {
          auto o = kSix;
          std::shuffle(o.begin(), o.end(), rng);
          out.push_back(rec("s", "u" + std::to_string(i), o));
        }
        return out;
      },
      [](const std::vector<RankingRecord>& r) {
        std::vector<RankingRecord> twice(r);
        twice.insert(twice.end(), r.begin(), r.end());
        const auto a = weighted_rank(r), b = weighted_rank(twice);
        return a.ordering == b.ordering && a.scores == b.scores;
      });
  EXPECT_EQ(bad, -1);
}

TEST(WeightedRank, GroupsBySample) {
  const std::vector<RankingRecord> r{rec("s2", "u", {"x", "y"}), rec("s1", "u", kSix), rec("s2", "v", {"y", "x"})};
  const auto g = weighted_ranks_by_sample(r);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].sample_id, "s1");
  EXPECT_EQ(g[1].raters, 2u);
  EXPECT_EQ(g[1].scores.at("x"), 1.5);
}

TEST(RankingRecord, JsonRoundTripAndErrors) {
  const RankingRecord r = rec("s", "u", {"b", "a"});
  const RankingRecord back = RankingRecord::from_json(r.to_json());
  EXPECT_EQ(back.sample_id, "s");
  EXPECT_EQ(back.rater_id, "u");
  EXPECT_EQ(back.ordering, r.ordering);
  EXPECT_THROW(RankingRecord::from_json("{"), ValidationError);
  EXPECT_THROW(RankingRecord::from_json(R"({"sample_id":"s"})"), ValidationError);
}

TEST(ReadRankings, ReportsLineNumbers) {
  TempDir dir;
  {
    std::ofstream out(dir / "r.jsonl");
    out << rec("s", "u", {"a", "b"}).to_json() << "\n\n" << rec("s", "v", {"b", "a"}).to_json() << "\n";
  }
  EXPECT_EQ(read_rankings_jsonl(dir / "r.jsonl").size(), 2u);
  std::ofstream(dir / "r.jsonl", std::ios::app) << "oops\n";
  try {
    read_rankings_jsonl(dir / "r.jsonl");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":4"), std::string::npos);
  }
}

TEST(ReadMetricCsv, HeadersAndEmptyScores) {
  TempDir dir;
  std::ofstream(dir / "niqe.csv") << "# polarity: lower\nid,score\ns1/a,3.5\ns1/b,\ns1/c,1.25\n";
  const MetricScores m = read_metric_csv(dir / "niqe.csv");
  EXPECT_EQ(m.name, "niqe");
  EXPECT_EQ(m.polarity, Polarity::LowerBetter);
  EXPECT_EQ(m.scores.size(), 2u);
  EXPECT_EQ(m.scores.at("s1/c"), 1.25);

  std::ofstream(dir / "x.csv") << "# name: Fancy\nid,qs\nweird,id,0.5\n";
  const MetricScores n = read_metric_csv(dir / "x.csv");
  EXPECT_EQ(n.name, "Fancy");
  EXPECT_EQ(n.polarity, Polarity::HigherBetter);
  EXPECT_EQ(n.scores.at("weird,id"), 0.5);
}

namespace {

struct Study {
  std::vector<SampleSet> samples;
  std::vector<WeightedRank> human;
};

Study random_study(Rng& rng, int count, int raters = 3) {
  Study s;
  for (int i = 0; i < count; ++i) {
    const std::string id = "s" + std::to_string(i);
    s.samples.push_back({id, kSix});
    std::vector<RankingRecord> r;
    for (int k = 0; k < raters; ++k) {
      auto o = kSix;
      std::shuffle(o.begin(), o.end(), rng);
      r.push_back(rec(id, "u" + std::to_string(k), o));
    }
    s.human.push_back(weighted_rank(r));
  }
  return s;
}

}  // namespace

TEST(Benchmark, HumanScoreItselfCorrelatesPerfectly) {
  Rng rng(3);
  const Study st = random_study(rng, 10, 1);
  MetricScores self{"self", Polarity::HigherBetter, {}};
  MetricScores inverse{"inverse", Polarity::LowerBetter, {}};
  for (const auto& h : st.human)
    for (const auto& [img, v] : h.scores) {
      self.scores[h.sample_id + "/" + img] = v;
      inverse.scores[h.sample_id + "/" + img] = -v;
    }
  const std::vector<MetricScores> metrics{inverse, self};
  const auto rows = benchmark(st.samples, st.human, metrics);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.srcc, 1.0);
    EXPECT_EQ(r.krcc, 1.0);
    EXPECT_EQ(r.samples_used, 10u);
  }
  EXPECT_EQ(rows[0].metric, "inverse");  // equal SRCC, sorted by name
}

TEST(Benchmark, ConstantMetricIsExcluded) {
  Rng rng(4);
  const Study st = random_study(rng, 5);
  MetricScores flat{"flat", Polarity::HigherBetter, {}};
  for (const auto& s : st.samples)
    for (const auto& i : s.image_ids) flat.scores[s.sample_id + "/" + i] = 0.5;
  MetricScores partial{"partial", Polarity::HigherBetter, {}};
  partial.scores["s0/a"] = 1.0;
  const std::vector<MetricScores> metrics{flat, partial};
  const auto rows = benchmark(st.samples, st.human, metrics);
  for (const auto& r : rows) {
    EXPECT_TRUE(std::isnan(r.srcc));
    EXPECT_EQ(r.samples_used, 0u);
    EXPECT_EQ(r.samples_excluded, 5u);
  }
  const std::string csv = render_table_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,srcc,krcc,samples,excluded");
  EXPECT_NE(render_table_text(rows).find("flat"), std::string::npos);
}

TEST(Benchmark, RandomMetricIsNearZero) {
  Rng rng(5);
  const Study st = random_study(rng, 200);
  MetricScores noise{"noise", Polarity::HigherBetter, {}};
  for (const auto& s : st.samples)
    for (const auto& i : s.image_ids) noise.scores[s.sample_id + "/" + i] = uniform01(rng);
  const std::vector<MetricScores> metrics{noise};
  const auto rows = benchmark(st.samples, st.human, metrics);
  EXPECT_NEAR(rows[0].srcc, 0.0, 0.1);
  EXPECT_NEAR(rows[0].krcc, 0.0, 0.1);
  const auto pooled = benchmark(st.samples, st.human, metrics, CorrelationMode::Pooled);
  EXPECT_NEAR(pooled[0].srcc, 0.0, 0.1);
  EXPECT_EQ(pooled[0].samples_used, 200u);
}

TEST(Benchmark, MissingHumanDataExcludesSample) {
  Rng rng(6);
  Study st = random_study(rng, 3);
  st.human.pop_back();
  MetricScores m{"m", Polarity::HigherBetter, {}};
  for (const auto& s : st.samples)
    for (std::size_t i = 0; i < s.image_ids.size(); ++i) m.scores[s.sample_id + "/" + s.image_ids[i]] = static_cast<double>(i);
  const std::vector<MetricScores> metrics{m};
  const auto rows = benchmark(st.samples, st.human, metrics);
  EXPECT_EQ(rows[0].samples_used, 2u);
  EXPECT_EQ(rows[0].samples_excluded, 1u);
}

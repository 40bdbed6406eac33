#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ifqa/errors.hpp"
#include "ifqa/studysvc.hpp"
#include "test_support.hpp"

using namespace ifqa;
using ifqa::testing::TempDir;
namespace fs = std::filesystem;

namespace {

// `count` samples of six restored images plus a reference.
void make_study(const fs::path& root, int count, int images = 6) {
  const auto img = ImageBuffer::filled(16, 16, ValueDomain::Byte255, ImageRole::HQ, 100);
  for (int s = 0; s < count; ++s) {
    const fs::path dir = root / ("s" + std::to_string(s));
    fs::create_directories(dir);
    write_image_png(dir / "reference.png", img);
    for (int i = 0; i < images; ++i) write_image_png(dir / ("m" + std::to_string(i) + ".png"), img);
  }
}

StudyConfig config_for(const TempDir& dir, int target = 30) {
  StudyConfig c;
  c.samples_root = dir / "samples";
  c.log_path = dir / "log.jsonl";
  c.target_raters = target;
  c.seed = 4;
  return c;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(StudyConfig, Validation) {
  StudyConfig c;
  c.target_raters = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(StudyService, LoadErrors) {
  TempDir dir;
  EXPECT_THROW(StudyService(config_for(dir)), NotFoundError);
  fs::create_directories(dir / "samples/lonely");
  write_image_png(dir / "samples/lonely/a.png", ImageBuffer::filled(4, 4, ValueDomain::Byte255, ImageRole::HQ, 0));
  EXPECT_THROW(StudyService(config_for(dir)), ConfigError);
}

TEST(StudyService, ReferenceExcluded) {
  TempDir dir;
  make_study(dir / "samples", 2);
  StudyService svc(config_for(dir));
  const Presentation p = svc.next_assignment("alice");
  EXPECT_FALSE(p.done);
  EXPECT_EQ(p.image_ids.size(), 6u);
  EXPECT_EQ(std::count(p.image_ids.begin(), p.image_ids.end(), "reference"), 0);
  EXPECT_EQ(svc.sample(p.sample_id).reference_id, "reference");
  EXPECT_THROW(svc.sample("nope"), NotFoundError);
}

TEST(StudyService, ReferenceFromSampleJson) {
  TempDir dir;
  make_study(dir / "samples", 1);
  std::ofstream(dir / "samples/s0/sample.json") << R"({"reference": "m5"})";
  StudyService svc(config_for(dir));
  const auto& s = svc.samples().front();
  EXPECT_EQ(s.reference_id, "m5");
  EXPECT_EQ(std::count(s.image_ids.begin(), s.image_ids.end(), "m5"), 0);

  StudyConfig keep = config_for(dir);
  keep.exclude_reference = false;
  EXPECT_EQ(StudyService(keep).samples().front().image_ids.size(), 7u);
}

TEST(StudyService, RepeatCallReturnsSameSampleReshuffled) {
  TempDir dir;
  make_study(dir / "samples", 3);
  StudyService svc(config_for(dir));
  const Presentation a = svc.next_assignment("r");
  std::set<std::vector<std::string>> orders{a.image_ids};
  for (int i = 0; i < 10; ++i) {
    const Presentation b = svc.next_assignment("r");
    EXPECT_EQ(b.sample_id, a.sample_id);
    EXPECT_EQ(sorted(b.image_ids), sorted(a.image_ids));
    orders.insert(b.image_ids);
  }
  EXPECT_GT(orders.size(), 1u);
}

TEST(StudyService, CompletionMarker) {
  TempDir dir;
  make_study(dir / "samples", 3);
  StudyService svc(config_for(dir));
  std::set<std::string> seen;
  for (int i = 0; i < 3; ++i) {
    const Presentation p = svc.next_assignment("r");
    ASSERT_FALSE(p.done);
    EXPECT_EQ(p.answered, static_cast<std::size_t>(i));
    EXPECT_EQ(p.total, 3u);
    seen.insert(p.sample_id);
    EXPECT_EQ(svc.submit_response("r", p.sample_id, p.image_ids), 1u);
  }
  EXPECT_EQ(seen.size(), 3u);
  const Presentation end = svc.next_assignment("r");
  EXPECT_TRUE(end.done);
  EXPECT_EQ(nlohmann::json::parse(presentation_to_json(end))["done"], true);
}

TEST(StudyService, RejectsBadOrderingsAndDuplicates) {
  TempDir dir;
  make_study(dir / "samples", 1);
  StudyService svc(config_for(dir));
  const Presentation p = svc.next_assignment("r");
  auto repeated = p.image_ids;
  repeated[1] = repeated[0];
  EXPECT_THROW(svc.submit_response("r", p.sample_id, repeated), ValidationError);
  auto with_ref = p.image_ids;
  with_ref[0] = "reference";
  EXPECT_THROW(svc.submit_response("r", p.sample_id, with_ref), ValidationError);
  EXPECT_THROW(svc.submit_response("r", "s9", p.image_ids), NotFoundError);
  EXPECT_THROW(svc.submit_response("", p.sample_id, p.image_ids), ValidationError);
  EXPECT_EQ(svc.snapshot()->log.size(), 0u);

  EXPECT_EQ(svc.submit_response("r", p.sample_id, p.image_ids), 1u);
  EXPECT_THROW(svc.submit_response("r", p.sample_id, p.image_ids), ConflictError);
  EXPECT_EQ(svc.snapshot()->coverage.at(p.sample_id), 1u);
}

TEST(StudyService, ThirtyRatersCompleteASample) {
  TempDir dir;
  make_study(dir / "samples", 1);
  StudyService svc(config_for(dir));
  for (int r = 0; r < 30; ++r) {
    const std::string rater = "r" + std::to_string(r);
    const Presentation p = svc.next_assignment(rater);
    svc.submit_response(rater, p.sample_id, p.image_ids);
    EXPECT_EQ(svc.results().front().complete, r == 29);
  }
  const SampleResult res = svc.results("s0").front();
  EXPECT_EQ(res.coverage, 30u);
  EXPECT_EQ(res.rank.raters, 30u);
  EXPECT_THROW(svc.results("s7"), NotFoundError);
}

TEST(StudyService, EmptyScope) {
  TempDir dir;
  make_study(dir / "samples", 2);
  StudyService svc(config_for(dir));
  EXPECT_THROW(svc.results(), EmptyScopeError);
  EXPECT_THROW(svc.results("s0"), EmptyScopeError);
}

TEST(StudyService, BalancesCoverage) {
  TempDir dir;
  make_study(dir / "samples", 4);
  StudyService svc(config_for(dir));
  for (int r = 0; r < 9; ++r) {
    const std::string rater = "r" + std::to_string(r);
    const Presentation p = svc.next_assignment(rater);
    svc.submit_response(rater, p.sample_id, p.image_ids);
    const auto snap = svc.snapshot();
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& s : svc.samples()) {
      const auto it = snap->coverage.find(s.id);
      const std::size_t c = it == snap->coverage.end() ? 0 : it->second;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(StudyService, ReplayMatchesLiveState) {
  TempDir dir;
  make_study(dir / "samples", 3);
  std::string live;
  {
    StudyService svc(config_for(dir, 2));
    for (int r = 0; r < 5; ++r) {
      const std::string rater = "r" + std::to_string(r);
      for (int k = 0; k < 2; ++k) {
        const Presentation p = svc.next_assignment(rater);
        svc.submit_response(rater, p.sample_id, p.image_ids);
      }
    }
    live = results_to_json(svc.results());
  }
  // A torn trailing line must not stop the replay.
  std::ofstream(dir / "log.jsonl", std::ios::app) << "{\"sample_id\":";
  StudyService again(config_for(dir, 2));
  EXPECT_EQ(again.replay_skipped(), 1u);
  EXPECT_EQ(results_to_json(again.results()), live);
  EXPECT_EQ(again.snapshot()->log.size(), 10u);

  std::vector<RankingRecord> log;
  for (const auto& r : again.snapshot()->log) log.push_back(*r);
  EXPECT_EQ(results_to_json(results_from_log(again.samples(), log, 2)), live);
}

TEST(StudyService, ResultsMatchWeightedRank) {
  TempDir dir;
  make_study(dir / "samples", 1);
  StudyService svc(config_for(dir));
  std::vector<RankingRecord> mine;
  for (int r = 0; r < 4; ++r) {
    const std::string rater = "r" + std::to_string(r);
    const Presentation p = svc.next_assignment(rater);
    svc.submit_response(rater, p.sample_id, p.image_ids);
    mine.push_back({p.sample_id, rater, p.image_ids});
  }
  const auto expected = weighted_rank(mine);
  const auto got = svc.results().front().rank;
  EXPECT_EQ(got.scores, expected.scores);
  EXPECT_EQ(got.ordering, expected.ordering);
}

TEST(StudyService, ConcurrentSubmissionsAreAllLogged) {
  TempDir dir;
  make_study(dir / "samples", 5);
  StudyService svc(config_for(dir));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&svc, t] {
      const std::string rater = "t" + std::to_string(t);
      for (;;) {
        const Presentation p = svc.next_assignment(rater);
        if (p.done) break;
        svc.submit_response(rater, p.sample_id, p.image_ids);
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(svc.snapshot()->log.size(), 20u);
  std::ifstream in(dir / "log.jsonl");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  EXPECT_EQ(lines, 20u);
}

TEST(StudyServer, HttpEndpoints) {
  TempDir dir;
  make_study(dir / "samples", 2);
  fs::create_directories(dir / "ui");
  std::ofstream(dir / "ui/index.html") << "<html>study</html>";
  StudyService svc(config_for(dir));
  StudyServer server(svc, dir / "ui");
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread th([&] { server.serve(); });

  httplib::Client cli("127.0.0.1", port);
  auto health = cli.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  EXPECT_EQ(cli.Get("/api/assignment")->status, 400);
  auto a = cli.Get("/api/assignment?rater=web1");
  ASSERT_EQ(a->status, 200);
  const auto pj = nlohmann::json::parse(a->body);
  const std::string sid = pj["sample_id"];
  std::vector<std::string> ids;
  for (const auto& im : pj["images"]) ids.push_back(im["id"]);
  EXPECT_EQ(ids.size(), 6u);

  auto img = cli.Get(pj["images"][0]["url"].get<std::string>());
  ASSERT_EQ(img->status, 200);
  EXPECT_EQ(img->body.substr(1, 3), "PNG");
  EXPECT_EQ(cli.Get("/api/image/" + sid + "/reference")->status, 404);

  EXPECT_EQ(cli.Get("/api/results")->status, 404);
  EXPECT_EQ(cli.Post("/api/response", "{", "application/json")->status, 400);
  nlohmann::json body{{"rater", "web1"}, {"sample_id", sid}, {"ordering", ids}};
  EXPECT_EQ(cli.Post("/api/response", body.dump(), "application/json")->status, 200);
  EXPECT_EQ(cli.Post("/api/response", body.dump(), "application/json")->status, 409);
  body["ordering"] = std::vector<std::string>{ids[0], ids[0]};
  body["rater"] = "web2";
  auto bad = cli.Post("/api/response", body.dump(), "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(nlohmann::json::parse(bad->body).contains("error"));

  auto res = cli.Get("/api/results?sample=" + sid);
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body)["results"][0]["raters"], 1);
  EXPECT_EQ(cli.Get("/api/results?sample=zzz")->status, 404);

  auto ui = cli.Get("/index.html");
  ASSERT_EQ(ui->status, 200);
  EXPECT_EQ(ui->body, "<html>study</html>");

  server.stop();
  th.join();
}

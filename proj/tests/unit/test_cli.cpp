#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ifqa/evalstats.hpp"
#include "ifqa/facedata.hpp"
#include "test_support.hpp"

using ifqa::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ifqa::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, HelpListsSubcommands) {
  const Invocation r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"synth", "degrade", "train", "assess", "eval", "study-serve"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST(Cli, Version) {
  const Invocation r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("ifqa ", 0), 0u);
  EXPECT_NE(r.out.find("ifqa-ckpt-1"), std::string::npos);
  EXPECT_NE(r.out.find("torch"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"synth"}).code, 1);  // --out missing
  EXPECT_EQ(run({"assess", "--in", "x", "--ckpt", "y", "--csv", "z", "--style", "sepia"}).code, 1);
}

TEST(Cli, ValidationVersusRuntimeFailures) {
  TempDir dir;
  // Neither --data nor --synth.
  Invocation r = run({"train", "--out", (dir / "run").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--synth"), std::string::npos);
  // Unsupported resolution is a configuration error.
  EXPECT_EQ(run({"synth", "--out", (dir / "s").string(), "--res", "48"}).code, 1);
  // Missing checkpoint is a load failure.
  fs::create_directories(dir / "imgs");
  r = run({"assess", "--in", (dir / "imgs").string(), "--ckpt", (dir / "none.pt").string(), "--csv",
           (dir / "o.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error ("), std::string::npos);
  // Missing human file.
  EXPECT_EQ(run({"eval", "--human", (dir / "h.jsonl").string(), "--scores", (dir / "o.csv").string()}).code, 2);
}

TEST(Cli, EndToEndPipeline) {
  TempDir dir;
  const std::string hq = (dir / "hq").string(), lq = (dir / "lq").string(), runp = (dir / "run").string();

  Invocation r = run({"synth", "--out", hq, "--count", "6", "--res", "32", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"degrade", "--in", hq, "--out", lq, "--seed", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "lq/manifest.jsonl"));

  r = run({"train", "--data", hq, "--out", runp, "--steps", "2", "--batch", "2", "--res", "32", "--train-fraction",
           "1", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("step 2"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "run/final.pt"));
  EXPECT_TRUE(fs::exists(dir / "run/split.json"));

  // One study sample holding an HQ face and two degraded copies.
  const fs::path s0 = dir / "study/s0";
  fs::create_directories(s0);
  std::vector<fs::path> hq_png;
  for (const auto& e : fs::directory_iterator(dir / "hq"))
    if (e.path().extension() == ".png" && e.path().string().find(".mask") == std::string::npos) hq_png.push_back(e.path());
  std::sort(hq_png.begin(), hq_png.end());
  ASSERT_GE(hq_png.size(), 2u);
  fs::copy_file(hq_png[0], s0 / "clean.png");
  fs::copy_file(dir / "lq" / hq_png[0].filename(), s0 / "bad.png");
  fs::copy_file(dir / "lq" / hq_png[1].filename(), s0 / "worse.png");

  r = run({"assess", "--in", (dir / "study").string(), "--ckpt", (dir / "run/final.pt").string(), "--csv",
           (dir / "ifqa.csv").string(), "--maps", (dir / "maps").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("scored 3 of 3"), std::string::npos);

  {
    std::ofstream h(dir / "human.jsonl");
    h << ifqa::RankingRecord{"s0", "u1", {"clean", "bad", "worse"}}.to_json() << "\n";
    h << ifqa::RankingRecord{"s0", "u2", {"clean", "worse", "bad"}}.to_json() << "\n";
  }
  r = run({"eval", "--human", (dir / "human.jsonl").string(), "--scores", (dir / "ifqa.csv").string(), "--format",
           "csv", "--out", (dir / "table.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("metric,srcc,krcc,samples,excluded\nifqa,", 0), 0u) << r.out;
  EXPECT_TRUE(fs::exists(dir / "table.csv"));
}

// Copyright 2026 The hiercascade Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "test_util.hpp"

namespace hiercascade {
namespace {

namespace fs = std::filesystem;
using cli::run;
using testing::scratch_dir;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// One small trained pipeline shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch_dir("cli").string();
    ASSERT_EQ(call({"synth", "--pairs", "300", "--d-raw", "16", "--latent", "8", "--noise", "0",
                    "--same-view", "--seed", "5", "--out", dir_ + "/data"})
                  .code,
              0);
    ASSERT_EQ(call({"train", "--data", dir_ + "/data", "--dims", "4,8,16", "--pools", "0,50,10",
                    "--epochs", "20", "--lr", "0.05", "--batch", "50", "--seed", "7", "--vlm",
                    "--vlm-epochs", "5", "--out", dir_ + "/model"})
                  .code,
              0);
    ASSERT_EQ(call({"encode", "--proj", dir_ + "/model/proj_gallery.hvlp", "--raw",
                    dir_ + "/data/gallery.hvlp", "--out", dir_ + "/g.hvlp"})
                  .code,
              0);
    ASSERT_EQ(call({"encode", "--proj", dir_ + "/model/proj_query.hvlp", "--raw",
                    dir_ + "/data/queries.hvlp", "--out", dir_ + "/q.hvlp"})
                  .code,
              0);
  }

  static std::string path(const std::string& rel) { return dir_ + "/" + rel; }

  static inline std::string dir_;
};

TEST_F(CliPipeline, SynthWritesFilesAndIsDeterministic) {
  for (const char* f : {"queries.hvlp", "gallery.hvlp", "truth.csv", "synth.manifest.json"}) {
    EXPECT_TRUE(fs::exists(path("data/") + f)) << f;
  }
  ASSERT_EQ(call({"synth", "--pairs", "300", "--d-raw", "16", "--latent", "8", "--noise", "0",
                  "--same-view", "--seed", "5", "--out", path("data2")})
                .code,
            0);
  for (const char* f : {"queries.hvlp", "gallery.hvlp", "truth.csv"}) {
    EXPECT_EQ(slurp(path("data/") + f), slurp(path("data2/") + f)) << f;
  }
  EXPECT_EQ(slurp(path("data/truth.csv")).substr(0, 19), "query_id,gallery_id");
}

TEST_F(CliPipeline, TrainOutputs) {
  const std::string history = slurp(path("model/history.csv"));
  EXPECT_EQ(history.substr(0, 11), "epoch,loss\n");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 22);
  EXPECT_TRUE(fs::exists(path("model/scorer.hvlp")));
  EXPECT_TRUE(fs::exists(path("model/vlm_history.csv")));
  EXPECT_TRUE(fs::exists(path("model/train.manifest.json")));
}

TEST_F(CliPipeline, TrainRerunIsByteIdentical) {
  ASSERT_EQ(call({"train", "--data", path("data"), "--dims", "4,8,16", "--pools", "0,50,10",
                  "--epochs", "20", "--lr", "0.05", "--batch", "50", "--seed", "7", "--vlm",
                  "--vlm-epochs", "5", "--out", path("model2")})
                .code,
            0);
  for (const char* f : {"proj_query.hvlp", "proj_gallery.hvlp", "scorer.hvlp", "history.csv",
                        "vlm_history.csv"}) {
    EXPECT_EQ(slurp(path("model/") + f), slurp(path("model2/") + f)) << f;
  }
}

TEST_F(CliPipeline, TrainUsageErrors) {
  EXPECT_EQ(call({"train", "--data", path("data"), "--dims", "32,16,8", "--out", path("bad")}).code,
            cli::kExitUsage);
  EXPECT_EQ(call({"train", "--data", path("data"), "--dims", "4,8", "--batch", "1", "--out",
                  path("bad")})
                .code,
            cli::kExitUsage);
}

TEST_F(CliPipeline, TrainDivergenceExitsFour) {
  EXPECT_EQ(call({"train", "--data", path("data"), "--dims", "4,8", "--lr", "1e30", "--epochs",
                  "3", "--batch", "300", "--out", path("diverged")})
                .code,
            cli::kExitDivergence);
}

TEST_F(CliPipeline, SearchIsIdenticalAcrossWorkers) {
  for (const char* w : {"1", "8"}) {
    ASSERT_EQ(call({"search", "--gallery", path("g.hvlp"), "--queries", path("q.hvlp"),
                    "--pools", "0,50,10", "--workers", w, "--omit-timings", "--out",
                    path(std::string("s") + w + ".jsonl")})
                  .code,
              0);
  }
  const std::string one = slurp(path("s1.jsonl"));
  EXPECT_EQ(one, slurp(path("s8.jsonl")));
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 300);
  EXPECT_NE(one.find("\"levels\""), std::string::npos);
  EXPECT_EQ(one.find("time_ns"), std::string::npos);
}

TEST_F(CliPipeline, SearchWithRerank) {
  ASSERT_EQ(call({"search", "--gallery", path("g.hvlp"), "--queries", path("q.hvlp"), "--pools",
                  "0,50,10", "--rerank", path("model/scorer.hvlp"), "--rerank-depth", "5",
                  "--max-queries", "3", "--out", path("rr.jsonl")})
                .code,
            0);
  const std::string text = slurp(path("rr.jsonl"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("\"reranked\":5"), std::string::npos);
}

TEST_F(CliPipeline, ScheduleMismatchExitsFive) {
  ASSERT_EQ(call({"train", "--data", path("data"), "--dims", "4,8", "--epochs", "1", "--batch",
                  "50", "--out", path("other")})
                .code,
            0);
  ASSERT_EQ(call({"encode", "--proj", path("other/proj_query.hvlp"), "--raw",
                  path("data/queries.hvlp"), "--out", path("q_other.hvlp")})
                .code,
            0);
  EXPECT_EQ(call({"search", "--gallery", path("g.hvlp"), "--queries", path("q_other.hvlp"),
                  "--out", path("mm.jsonl")})
                .code,
            cli::kExitMismatch);
}

TEST_F(CliPipeline, BenchReportsBothSides) {
  const Outcome o = call({"bench", "--gallery", path("g.hvlp"), "--queries", path("q.hvlp"),
                          "--truth", path("data/truth.csv"), "--pools", "0,50,10", "--ks",
                          "1,5", "--out", path("bench.txt")});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* key : {"cascade_ms_per_query = ", "brute_ms_per_query = ", "speedup = ",
                          "r@1_cascade = ", "r@5_brute = ", "r@5_delta = "}) {
    EXPECT_NE(o.out.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(slurp(path("bench.txt")), o.out);
}

TEST_F(CliPipeline, EvalOverSearchResults) {
  ASSERT_EQ(call({"search", "--gallery", path("g.hvlp"), "--queries", path("q.hvlp"), "--pools",
                  "0,50,10", "--out", path("e.jsonl")})
                .code,
            0);
  const Outcome o = call({"eval", "--results", path("e.jsonl"), "--truth",
                          path("data/truth.csv"), "--ks", "5,10,20", "--out", path("eval")});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const char* key : {"r@5_q2g = ", "r@10_q2g = ", "r@20_q2g = ", "ar = "}) {
    EXPECT_NE(o.out.find(key), std::string::npos) << key;
  }
  EXPECT_TRUE(fs::exists(path("eval/eval.csv")));
  EXPECT_TRUE(fs::exists(path("eval/eval.manifest.json")));
}

TEST(Cli, EvalFixtureRankings) {
  const auto dir = scratch_dir("cli_eval");
  std::ofstream(dir / "r.jsonl") << "{\"query\":1,\"final\":[[5,0.9],[6,0.8],[7,0.1]]}\n"
                                 << "{\"query\":2,\"final\":[[6,0.9],[5,0.8],[8,0.1]]}\n";
  std::ofstream(dir / "t.csv") << "query_id,gallery_id\n1,7\n2,8\n";
  const Outcome o = call({"eval", "--results", (dir / "r.jsonl").string(), "--truth",
                          (dir / "t.csv").string(), "--ks", "1,5"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("r@1_q2g = 0.000000\n"), std::string::npos);
  EXPECT_NE(o.out.find("r@5_q2g = 1.000000\n"), std::string::npos);
}

TEST(Cli, EvalValues) {
  const Outcome o = call({"eval", "--values", "92.6,99.3,99.9,79.8,95.3,97.7"});
  ASSERT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("ar = 94.100000\n"), std::string::npos);
}

TEST(Cli, CostExamples) {
  Outcome o = call({"cost", "--n", "1e9", "--pools", "1e9,1e5,100", "--dims", "128,300,768",
                    "--te", "1000", "--layers", "12"});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("traditional = 768000012000\n"), std::string::npos);
  EXPECT_NE(o.out.find("hierarchical = 128030080800\n"), std::string::npos);
  EXPECT_NE(o.out.find("speedup = 5.999\n"), std::string::npos);

  o = call({"cost", "--te", "0"});
  EXPECT_NE(o.out.find("hierarchical = 128030076800\n"), std::string::npos);
  o = call({"cost", "--pools", "0,0,0"});
  EXPECT_NE(o.out.find("hierarchical = 12000\n"), std::string::npos);
}

TEST(Cli, UsageAndIoErrors) {
  EXPECT_EQ(call({"synth", "--pairs", "10"}).code, cli::kExitUsage);
  EXPECT_EQ(call({}).code, cli::kExitUsage);
  EXPECT_EQ(call({"nonsense"}).code, cli::kExitUsage);
  const auto dir = scratch_dir("cli_io");
  std::ofstream(dir / "junk.hvlp") << "not a store";
  EXPECT_EQ(call({"search", "--gallery", (dir / "junk.hvlp").string(), "--queries",
                  (dir / "junk.hvlp").string(), "--out", (dir / "o.jsonl").string()})
                .code,
            cli::kExitIo);
  EXPECT_EQ(call({"search", "--gallery", (dir / "missing.hvlp").string(), "--queries",
                  (dir / "missing.hvlp").string(), "--out", (dir / "o.jsonl").string()})
                .code,
            cli::kExitIo);
}

}  // namespace
}  // namespace hiercascade

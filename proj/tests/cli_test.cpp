// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "lenforge/error.hpp"
#include "lenforge/io.hpp"

namespace lenforge::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args, const std::string& stdin_text = {}) {
  std::istringstream in(stdin_text);
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, {in, out, err});
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lenforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("LENFORGE_CONFIG");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { io::write_atomic(dir_ / name, text); }
  std::string read(const std::string& name) const { return io::read_file(dir_ / name); }

  // synthesize -> augment(characters) -> train sft; returns the final checkpoint path.
  std::string train_sft_fixture(int count = 400) {
    EXPECT_EQ(invoke({"synthesize", "--count", std::to_string(count), "--max-length", "20", "--seed", "4", "-o",
                      path("corpus.jsonl")})
                  .code,
              0);
    EXPECT_EQ(invoke({"augment", path("corpus.jsonl"), "-o", path("aug.jsonl")}).code, 0);
    EXPECT_EQ(invoke({"train", "sft", path("aug.jsonl"), "--output-dir", path("sft")}).code, 0);
    return path("sft/final.ckpt");
  }

  fs::path dir_;
};

TEST_F(CliTest, MeasureEmitsOneLinePerInputLine) {
  write("three.txt", "hello world\nabc\n\xC3\xA9t\xC3\xA9\n");
  const auto r = invoke({"measure", path("three.txt")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1\tcharacters\t11\n2\tcharacters\t3\n3\tcharacters\t3\n");
}

TEST_F(CliTest, MeasureEmptyAndMissingFiles) {
  write("empty.txt", "");
  const auto empty = invoke({"measure", path("empty.txt")});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(empty.out, "");
  const auto missing = invoke({"measure", path("nope.txt")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("nope.txt"), std::string::npos);
}

TEST_F(CliTest, MeasureSeveralMetricsFromStdinAndJsonl) {
  const auto r = invoke({"measure", "--metric", "letters,speech,words"}, "Hi there, you\n");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1\tletters\t10\n1\tspeech\t0.8666666666666667\n1\twords\t3\n");
  const auto j = invoke({"measure", "--jsonl"}, R"({"id":"q","prompt":"p","response":"abcd"})"
                                                 "\n");
  EXPECT_EQ(j.out, "q\tcharacters\t4\n");
}

TEST_F(CliTest, AugmentSkipsDegenerateAndIsDeterministic) {
  write("in.jsonl",
        R"({"id":"a","prompt":"p","response":"four"})"
        "\n"
        R"({"id":"b","prompt":"p","response":""})"
        "\n"
        "garbage\n"
        R"({"id":"c","prompt":"p","response":"x y"})"
        "\n");
  const auto r = invoke({"augment", path("in.jsonl"), "-o", path("out1.jsonl")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(count_lines(read("out1.jsonl")), 2u);
  EXPECT_NE(r.err.find("skipped 2"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"augment", path("in.jsonl"), "-o", path("out2.jsonl")}).code, 0);
  EXPECT_EQ(read("out1.jsonl"), read("out2.jsonl"));
}

TEST_F(CliTest, AugmentRejectsHeldOutMetricWithoutProbe) {
  write("in.jsonl", R"({"prompt":"p","response":"two words"})"
                    "\n");
  EXPECT_EQ(invoke({"augment", path("in.jsonl"), "--metric", "words"}).code, 2);
  const auto probe = invoke({"augment", path("in.jsonl"), "--metric", "words", "--probe"});
  EXPECT_EQ(probe.code, 0);
  EXPECT_NE(probe.out.find("Generate precisely 2 words"), std::string::npos);
}

TEST_F(CliTest, PairsChooseClosestCandidate) {
  write("c.jsonl",
        R"({"id":"x","prompt":"p","metric":"characters","target":5,"candidates":["aaa","aaaaaa","a"]})"
        "\n"
        R"({"id":"y","prompt":"p","metric":"characters","target":5,"candidates":["only"]})"
        "\n");
  const auto r = invoke({"pairs", path("c.jsonl")});
  EXPECT_EQ(r.code, 0);
  const auto lines = dataset::parse_jsonl(r.out);
  ASSERT_EQ(lines.size(), 2u);
  for (const auto& j : lines) EXPECT_EQ(j["chosen"], "aaaaaa");
  EXPECT_EQ(lines[0]["rejected"], "aaa");
  EXPECT_EQ(lines[1]["rejected"], "a");
}

TEST_F(CliTest, PairsWithoutTargetIsInputError) {
  write("c.jsonl", R"({"id":"x","prompt":"p","candidates":["a","b"]})"
                   "\n");
  EXPECT_EQ(invoke({"pairs", path("c.jsonl")}).code, 2);
}

TEST_F(CliTest, TrainSftWritesEpochCheckpointsAndMetrics) {
  train_sft_fixture();
  for (const char* name : {"epoch-001.ckpt", "epoch-002.ckpt", "epoch-003.ckpt", "final.ckpt", "selected.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sft" / name)) << name;
  }
  const auto csv = read("sft/metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,mean_abs_deviation_pct");
  EXPECT_EQ(count_lines(csv), 5u);
}

TEST_F(CliTest, TrainIsReproducible) {
  train_sft_fixture();
  ASSERT_EQ(invoke({"train", "sft", path("aug.jsonl"), "--output-dir", path("again")}).code, 0);
  for (const char* name : {"epoch-001.ckpt", "epoch-002.ckpt", "final.ckpt", "metrics.csv"}) {
    EXPECT_EQ(read(std::string("sft/") + name), read(std::string("again/") + name)) << name;
  }
  const auto a = invoke({"describe", path("sft/final.ckpt")});
  const auto b = invoke({"describe", path("again/final.ckpt")});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("stage: sft"), std::string::npos);
}

TEST_F(CliTest, PreferenceStagesNeedReference) {
  const auto sft = train_sft_fixture();
  ASSERT_EQ(invoke({"generate", "--checkpoint", sft, path("aug.jsonl"), "--candidates", "3", "-o",
                    path("cands.jsonl")})
                .code,
            0);
  ASSERT_EQ(invoke({"pairs", path("cands.jsonl"), "-o", path("pairs.jsonl")}).code, 0);
  EXPECT_EQ(invoke({"train", "dpo", path("pairs.jsonl"), "--output-dir", path("dpo")}).code, 2);
  EXPECT_EQ(invoke({"train", "ppo", path("aug.jsonl"), "--output-dir", path("ppo")}).code, 2);
  EXPECT_EQ(invoke({"train", "dpo", path("pairs.jsonl"), "--reference", sft, "--output-dir", path("dpo")}).code, 0);
  EXPECT_EQ(invoke({"train", "ppo", path("aug.jsonl"), "--reference", sft, "--output-dir", path("ppo")}).code, 0);
  EXPECT_EQ(invoke({"train", "orpo", path("pairs.jsonl"), "--init", sft, "--output-dir", path("orpo")}).code, 0);
  EXPECT_NE(invoke({"describe", path("orpo/final.ckpt")}).out.find("stage: orpo"), std::string::npos);
}

TEST_F(CliTest, DivergentTrainingExitsThreeAndKeepsLastGood) {
  write("pairs.jsonl",
        R"({"id":"1","prompt":"p","metric":"characters","target":1,"chosen":"a","rejected":"aaaa"})"
        "\n"
        R"({"id":"2","prompt":"p","metric":"characters","target":2,"chosen":"aa","rejected":"aaaaa"})"
        "\n"
        R"({"id":"3","prompt":"p","metric":"characters","target":3,"chosen":"aaa","rejected":"a"})"
        "\n");
  const auto r = invoke({"train", "orpo", path("pairs.jsonl"), "--output-dir", path("bad"), "--lr", "10000",
                         "--epochs", "50"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "bad" / "last-good.ckpt"));
}

TEST_F(CliTest, EvaluateCompareAndReport) {
  write("base.jsonl",
        R"({"id":"1","metric":"characters","target":10,"response":"aaaaaaaaaaaaaaaaaaaa"})"
        "\n"
        R"({"id":"2","metric":"words","target":4,"response":"one two"})"
        "\n");
  write("cand.jsonl", R"({"id":"1","metric":"characters","target":10,"response":"aaaaaaaaaaa"})"
                      "\n");
  ASSERT_EQ(invoke({"evaluate", path("base.jsonl"), "-o", path("base.json")}).code, 0);
  ASSERT_EQ(invoke({"evaluate", path("cand.jsonl"), "-o", path("cand.json")}).code, 0);
  const auto report = nlohmann::json::parse(read("base.json"));
  EXPECT_EQ(report["schema_version"], 1);
  EXPECT_EQ(report["metrics"].size(), 1u);
  EXPECT_EQ(report["held_out"][0]["metric"], "words");
  EXPECT_EQ(report["config_digest"].get<std::string>().size(), 64u);

  const auto cmp = invoke({"compare", path("base.json"), path("cand.json")});
  EXPECT_EQ(cmp.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(cmp.out)["metrics"][0]["percent_change"].get<double>(), -90.0, 1e-9);

  const auto csv = invoke({"evaluate", path("base.jsonl"), "--format", "csv"});
  EXPECT_EQ(csv.out, "id,metric,target,actual,signed_deviation_pct\n1,characters,10,20,100\n2,words,4,2,-50\n");
  EXPECT_NE(invoke({"evaluate", path("base.jsonl"), "--format", "text"}).out.find("words (held-out)"),
            std::string::npos);

  ASSERT_EQ(invoke({"report", path("base.json"), "-o", path("base.svg")}).code, 0);
  EXPECT_TRUE(read("base.svg").starts_with("<svg"));
  EXPECT_EQ(invoke({"compare", path("base.json"), path("missing.json")}).code, 2);
}

TEST_F(CliTest, ConfigFileEnvironmentAndOverrides) {
  write("good.conf", "# comment\nmetric = letters\nspeech_rate = 10\n");
  write("bad.conf", "metric = letters\ncolour = blue\n");
  write("dup.conf", "lr = 0.1\nlr = 0.2\n");
  EXPECT_EQ(invoke({"measure", "--config", path("good.conf")}, "ab c\n").out, "1\tletters\t3\n");
  EXPECT_EQ(invoke({"measure", "--config", path("good.conf"), "--metric", "characters"}, "ab c\n").out,
            "1\tcharacters\t4\n");
  const auto bad = invoke({"measure", "--config", path("bad.conf")}, "x\n");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("colour"), std::string::npos);
  EXPECT_EQ(invoke({"measure", "--config", path("dup.conf")}, "x\n").code, 2);
  EXPECT_EQ(invoke({"measure", "--set", "nonsense=1"}, "x\n").code, 2);
  EXPECT_EQ(invoke({"measure", "--beta", "-1"}, "x\n").code, 2);

  setenv("LENFORGE_CONFIG", path("good.conf").c_str(), 1);
  EXPECT_EQ(invoke({"measure", "--metric", "speech"}, "abcde\n").out, "1\tspeech\t0.5\n");
  unsetenv("LENFORGE_CONFIG");
}

TEST_F(CliTest, ConfigTextRoundTrips) {
  RunConfig config;
  apply_config_text(config, "metric = print,letters\ntemplate.letters = Use {LEN} letters.\nbeta = 0.25\n", "t");
  RunConfig again;
  apply_config_text(again, config.to_text(), "round-trip");
  EXPECT_EQ(again.to_text(), config.to_text());
  EXPECT_EQ(again.digest(), config.digest());
  apply_config_text(again, "template.letters = no placeholder\n", "t");
  EXPECT_THROW(again.validate(), ConfigError);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"measure", "--no-such-flag"}).code, 2);
  EXPECT_EQ(invoke({"train", "rlhf", "x", "--output-dir", path("o")}).code, 2);
  const auto help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("augment"), std::string::npos);
}

TEST_F(CliTest, EndToEndPipelineComposes) {
  const auto sft = train_sft_fixture(600);
  ASSERT_EQ(invoke({"generate", "--checkpoint", sft, path("aug.jsonl"), "--candidates", "4", "-o",
                    path("cands.jsonl")})
                .code,
            0);
  ASSERT_EQ(invoke({"pairs", path("cands.jsonl"), "-o", path("pairs.jsonl")}).code, 0);
  ASSERT_EQ(invoke({"train", "orpo", path("pairs.jsonl"), "--init", sft, "--output-dir", path("orpo")}).code, 0);
  ASSERT_EQ(invoke({"generate", "--checkpoint", sft, path("aug.jsonl"), "-o", path("gen_sft.jsonl")}).code, 0);
  ASSERT_EQ(invoke({"generate", "--checkpoint", path("orpo/final.ckpt"), path("aug.jsonl"), "-o",
                    path("gen_orpo.jsonl")})
                .code,
            0);
  ASSERT_EQ(invoke({"evaluate", path("gen_sft.jsonl"), "-o", path("sft.json")}).code, 0);
  ASSERT_EQ(invoke({"evaluate", path("gen_orpo.jsonl"), "-o", path("orpo.json")}).code, 0);
  const auto cmp = invoke({"compare", path("sft.json"), path("orpo.json")});
  ASSERT_EQ(cmp.code, 0);
  EXPECT_LT(nlohmann::json::parse(cmp.out)["overall"]["percent_change"].get<double>(), 0.0);
}

#ifdef LENFORGE_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
  const std::string cli = LENFORGE_CLI_PATH;
  auto status = [](const std::string& command) {
    const int raw = std::system((command + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  write("three.txt", "a\nb\nc\n");
  EXPECT_EQ(status(cli + " measure " + path("three.txt")), 0);
  EXPECT_EQ(status(cli + " measure " + path("absent.txt")), 2);
  EXPECT_EQ(status(cli), 2);
  EXPECT_EQ(status("echo hi | " + cli + " measure -"), 0);
}
#endif

}  // namespace
}  // namespace lenforge::cli

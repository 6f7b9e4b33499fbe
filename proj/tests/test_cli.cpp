#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "neurospect/cli.hpp"
#include "neurospect/pipeline.hpp"
#include "support.hpp"

using namespace neurospect;
namespace nt = neurospect::testing;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "neurospect");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string small_config(const nt::TempDir& dir) {
  pipeline::TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.workers = 2;
  c.layers = {nn::Conv2D{4, 3, 3, 2, nn::Activation::relu}, nn::Flatten{}, nn::ConcatAux{4},
              nn::Dense{16, nn::Activation::relu}, nn::Dense{3}, nn::Softmax{}};
  const auto path = (dir / "train.json").string();
  nt::write_file(path, c.to_json().dump(2));
  return path;
}

}  // namespace

TEST(Cli, SynthTrainEvaluateAblateSummarize) {
  nt::TempDir dir;
  const auto d = dir.path().string();
  auto r = run({"synth", "--out-dir", d, "--subjects-per-class", "12", "--duration", "16", "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto features = (dir / "features.csv").string();
  ASSERT_TRUE(std::filesystem::exists(features));

  const auto cfg = small_config(dir);
  const auto model = (dir / "model.json").string();
  r = run({"train", "--features", features, "--config", cfg, "--out", model});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("held-out accuracy"), std::string::npos);
  const auto history = json::parse(nt::read_file(model + ".history.json"));
  EXPECT_EQ(history["epochs"].size(), 3u);
  EXPECT_NO_THROW(pipeline::load_artifact(model));

  r = run({"evaluate", "--model", model, "--features", features});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto eval = json::parse(nt::read_file(dir / "evaluation.json"));
  EXPECT_TRUE(eval.contains("confusion_matrix"));
  // Evaluating the held-out split reproduces the report stored at training time.
  EXPECT_EQ(eval, pipeline::load_artifact(model).report->to_json());

  r = run({"evaluate", "--model", model, "--features", features, "--all", "--out", (dir / "all.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t total = 0;
  const auto all = json::parse(nt::read_file(dir / "all.json"));
  for (const auto& row : all["confusion_matrix"])
    for (const auto& v : row) total += v.get<std::size_t>();
  EXPECT_EQ(total, 36u);

  r = run({"ablate", "--features", features, "--config", cfg, "--out", (dir / "ablation.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto abl = json::parse(nt::read_file(dir / "ablation.json"));
  EXPECT_TRUE(abl.contains("arms"));
  EXPECT_TRUE(abl.contains("deltas"));

  r = run({"summarize", "--features", features, "--out", (dir / "summary.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(nt::read_file(dir / "summary.json"))["n_records"], 36);
}

TEST(Cli, RawSynthThenExtract) {
  nt::TempDir dir;
  auto r = run({"synth", "--out-dir", dir.path().string(), "--subjects-per-class", "2", "--duration", "8",
                "--raw"});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(std::filesystem::exists(dir / "manifest.csv"));
  const auto out = (dir / "extracted.csv").string();
  r = run({"extract", "--manifest", (dir / "manifest.csv").string(), "--out", out, "--segment", "128"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto data = dataset::parse_feature_table(out, dataset::FeatureMode::full);
  EXPECT_EQ(data.records.size(), 6u);
  EXPECT_TRUE(data.records[0].coherence.has_value());
}

TEST(Cli, PreprocessWritesSplitsAndState) {
  nt::TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--subjects-per-class", "10", "--duration", "8"}).code, 0);
  const auto r = run({"preprocess", "--features", (dir / "features.csv").string(), "--out-dir",
                      (dir / "prep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto state = json::parse(nt::read_file(dir / "prep" / "preprocess.json"));
  for (const char* k : {"config", "transform", "encoder", "split"}) EXPECT_TRUE(state.contains(k)) << k;
  const auto n_test = state["split"]["test"].size();
  const auto train = dataset::parse_feature_table(dir / "prep" / "train.csv", dataset::FeatureMode::full);
  const auto test = dataset::parse_feature_table(dir / "prep" / "test.csv", dataset::FeatureMode::full);
  EXPECT_EQ(test.records.size(), n_test);
  EXPECT_EQ(train.records.size() + test.records.size(), 30u);
}

TEST(Cli, UsageErrorsAreNonzero) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"train", "--bogus"}).code, 0);
  EXPECT_NE(run({"frobnicate"}).code, 0);
  const auto r = run({"synth", "--out-dir", "/tmp/x", "--classes", "9"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("--classes"), std::string::npos);
}

TEST(Cli, MissingInputFileNamed) {
  const auto r = run({"train", "--features", "/no/such/table.csv", "--out", "/tmp/m.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("input file not found: /no/such/table.csv"), std::string::npos);
}

TEST(Cli, ConfigParseErrorNamed) {
  nt::TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--subjects-per-class", "4", "--duration", "8"}).code, 0);
  nt::write_file(dir / "bad.json", "{\"epochs\": ");
  const auto r = run({"train", "--features", (dir / "features.csv").string(), "--config",
                      (dir / "bad.json").string(), "--out", (dir / "m.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config parse error"), std::string::npos) << r.err;
}

TEST(Cli, SingleClassIsDegenerate) {
  nt::TempDir dir;
  ASSERT_EQ(run({"synth", "--out-dir", dir.path().string(), "--subjects-per-class", "6", "--duration", "8"}).code, 0);
  // Keep only the header and the healthy-control rows.
  std::istringstream in(nt::read_file(dir / "features.csv"));
  std::string line, kept;
  std::getline(in, line);
  kept = line + "\n";
  while (std::getline(in, line)) {
    if (line.find("Healthy control") != std::string::npos) kept += line + "\n";
  }
  nt::write_file(dir / "one.csv", kept);
  const auto r = run({"train", "--features", (dir / "one.csv").string(), "--out", (dir / "m.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("degenerate class counts"), std::string::npos) << r.err;
}

TEST(Cli, KaggleTableThroughAdapter) {
  nt::TempDir dir;
  nt::write_file(dir / "kaggle.csv", nt::kaggle_fixture(21));
  const auto r = run({"summarize", "--features", (dir / "kaggle.csv").string(), "--adapter",
                      (nt::source_dir() / "data" / "kaggle_adapter.map").string(), "--out",
                      (dir / "s.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(nt::read_file(dir / "s.json"))["n_records"], 21);
}

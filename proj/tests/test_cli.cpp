#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "filterloss/dataset.hpp"
#include "filterloss/report.hpp"
#include "support/support.hpp"
#include "support/tiny_config.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const testing::TempDir& dir, const std::string& args) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string("\"") + FILTERLOSS_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

std::string write_config(const testing::TempDir& dir, filterloss::ExperimentConfig c) {
  const fs::path path = dir / "config.json";
  filterloss::write_json(path, filterloss::config_to_json(c));
  return path.string();
}

filterloss::Json results_of(const fs::path& p) { return filterloss::Json::parse(slurp(p)).at("results"); }

}  // namespace

TEST_CASE("gen writes deterministic files") {
  testing::TempDir dir("cli-gen");
  const auto config = write_config(dir, filterloss::default_experiment_config());
  const auto a = cli(dir, "--config " + config + " --out " + (dir / "a").string() + " gen");
  REQUIRE(a.code == 0);
  CHECK(a.output.find("imbalance ratio 33.3") != std::string::npos);
  const auto b = cli(dir, "--config " + config + " --out " + (dir / "b").string() + " gen");
  REQUIRE(b.code == 0);
  for (const char* f : {"source_train.csv", "source_test.csv", "target_train.csv", "target_test.csv"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const auto ra = results_of(dir / "a" / "distribution.json");
  CHECK(ra == results_of(dir / "b" / "distribution.json"));
  CHECK(ra.at("target").at("imbalance_ratio").get<double>() == doctest::Approx(500.0 / 15.0));
  const auto train = filterloss::load_csv(dir / "a" / "target_train.csv");
  CHECK(train.num_classes() == 6);
  CHECK(train.d() == 32);
}

TEST_CASE("analyze") {
  testing::TempDir dir("cli-analyze");
  const auto config = write_config(dir, testing::tiny_config());
  const auto out = (dir / "data").string();
  REQUIRE(cli(dir, "--config " + config + " --out " + out + " gen").code == 0);
  const auto src = (dir / "data" / "source_train.csv").string();
  const auto tgt = (dir / "data" / "target_train.csv").string();

  SUBCASE("identical files give zero deltas") {
    REQUIRE(cli(dir, "--out " + (dir / "same").string() + " analyze " + src + " " + src).code == 0);
    const auto rows = results_of(dir / "same" / "cross.json");
    CHECK(rows.size() == 6);
    for (const auto& row : rows) {
      CHECK(row.at("delta_euclid").get<double>() == 0.0);
      CHECK(row.at("delta_cosine").get<double>() == 0.0);
    }
  }
  SUBCASE("the noisier target is more spread out in every class") {
    REQUIRE(cli(dir, "--out " + (dir / "pair").string() + " analyze " + src + " " + tgt).code == 0);
    for (const auto& row : results_of(dir / "pair" / "cross.json")) {
      CHECK(row.at("delta_euclid").get<double>() > 0.0);
    }
  }
  SUBCASE("single dataset") {
    REQUIRE(cli(dir, "--out " + (dir / "one").string() + " analyze --reference centroid " + src).code == 0);
    CHECK(fs::exists(dir / "one" / "similarity.csv"));
  }
  SUBCASE("disjoint class names") {
    std::ofstream(dir / "other.csv") << "f0,f1,f2,f3,f4,f5,f6,f7,label\n0,0,0,0,0,0,0,0,zebra\n1,1,1,1,1,1,1,1,yak\n";
    const auto r = cli(dir, "--out " + (dir / "x").string() + " analyze " + src + " " + (dir / "other.csv").string());
    CHECK(r.code != 0);
    CHECK(r.output.find("share no class") != std::string::npos);
  }
}

TEST_CASE("weights and resample") {
  testing::TempDir dir("cli-weights");
  const auto config = write_config(dir, filterloss::default_experiment_config());
  REQUIRE(cli(dir, "--config " + config + " --out " + (dir / "data").string() + " gen").code == 0);
  const auto tgt = (dir / "data" / "target_train.csv").string();
  const auto n = filterloss::load_csv(tgt).n();

  SUBCASE("default ramp over enn and oss") {
    REQUIRE(cli(dir, "--out " + (dir / "w").string() + " weights --data " + tgt).code == 0);
    std::ifstream in(dir / "w" / "weights.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "weight");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      const double w = std::stod(line);
      CHECK((w == 0.1 || w == 0.55 || w == 1.0));
      ++rows;
    }
    CHECK(rows == n);
  }
  SUBCASE("one sampler with a 0/1 table") {
    REQUIRE(cli(dir, "--out " + (dir / "w1").string() + " weights --samplers enn --table 0,1 --data " + tgt).code == 0);
    const auto hist = results_of(dir / "w1" / "weights.json").at("histogram");
    REQUIRE(hist.size() == 2);
    std::size_t total = 0;
    for (const auto& bin : hist) total += bin.at("count").get<std::size_t>();
    CHECK(total == n);
  }
  SUBCASE("bad table length") {
    const auto r = cli(dir, "--out " + (dir / "w2").string() + " weights --samplers enn,oss --table 0,1 --data " + tgt);
    CHECK(r.code == 1);
    CHECK(r.output.find("3 entries") != std::string::npos);
  }
  SUBCASE("resample rus") {
    REQUIRE(cli(dir, "--out " + (dir / "r").string() + " resample --method random_under --data " + tgt).code == 0);
    const auto out = filterloss::load_csv(dir / "r" / "resampled.csv");
    const auto counts = out.class_counts();
    for (auto c : counts) CHECK(c == counts.front());
  }
  SUBCASE("unknown method") {
    CHECK(cli(dir, "--out " + (dir / "r2").string() + " resample --method nope --data " + tgt).code == 1);
  }
}

TEST_CASE("pretrain and finetune") {
  testing::TempDir dir("cli-train");
  const auto config = write_config(dir, testing::tiny_config());
  const auto out = (dir / "run").string();
  REQUIRE(cli(dir, "--config " + config + " --out " + out + " pretrain").code == 0);
  CHECK(fs::exists(dir / "run" / "model.bin"));

  const auto a = cli(dir, "--config " + config + " --out " + out + " finetune --strategy filterloss:enn+oss --loss focal_logits");
  REQUIRE(a.code == 0);
  const auto first = slurp(dir / "run" / "finetuned.bin");
  const auto results = results_of(dir / "run" / "finetune.json");
  const auto history = slurp(dir / "run" / "finetune_history.csv");
  REQUIRE(cli(dir, "--config " + config + " --out " + out + " finetune --strategy filterloss:enn+oss --loss focal_logits").code == 0);
  CHECK(slurp(dir / "run" / "finetuned.bin") == first);
  CHECK(results_of(dir / "run" / "finetune.json") == results);
  CHECK(slurp(dir / "run" / "finetune_history.csv") == history);

  const auto missing = cli(dir, "--config " + config + " --out " + out + " finetune --model " + (dir / "nope.bin").string());
  CHECK(missing.code == 2);
  CHECK(cli(dir, "--config " + config + " --out " + out + " finetune --strategy bogus").code == 1);
}

TEST_CASE("bench and config errors") {
  testing::TempDir dir("cli-bench");
  auto c = testing::tiny_config();
  c.strategies = {"none", "rus", "filterloss:enn"};
  c.losses.resize(2);
  const auto config = write_config(dir, c);
  REQUIRE(cli(dir, "--config " + config + " --out " + (dir / "b1").string() + " bench --quiet").code == 0);
  REQUIRE(cli(dir, "--config " + config + " --out " + (dir / "b2").string() + " --jobs 1 bench --quiet").code == 0);
  CHECK(results_of(dir / "b1" / "bench.json") == results_of(dir / "b2" / "bench.json"));
  CHECK(slurp(dir / "b1" / "bench_table.csv") == slurp(dir / "b2" / "bench_table.csv"));
  CHECK(results_of(dir / "b1" / "bench.json").at("cells").size() == 6);

  c.finetune.learning_rate = 1e300;
  const auto broken = write_config(dir, c);
  CHECK(cli(dir, "--config " + broken + " --out " + (dir / "b3").string() + " bench --quiet").code == 3);

  std::ofstream(dir / "bad.json") << R"({"strategies": []})";
  CHECK(cli(dir, "--config " + (dir / "bad.json").string() + " gen").code == 1);
  std::ofstream(dir / "empty.json") << R"({"schema_version": 1, "strategies": []})";
  CHECK(cli(dir, "--config " + (dir / "empty.json").string() + " bench").code == 1);
  CHECK(cli(dir, "--no-such-flag").code == 1);
}

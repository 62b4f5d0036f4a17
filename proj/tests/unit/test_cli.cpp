#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cl3d/cli/commands.hpp"
#include "cl3d/cli/config.hpp"
#include "cl3d/core/synthetic.hpp"
#include "helpers.hpp"

using namespace cl3d;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cl3d");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json tiny_config(const std::filesystem::path& out_dir) {
  SyntheticDatasetSpec spec = builtin_benchmark_spec(3);
  spec.train_per_class = 6;
  spec.test_per_class = 3;
  spec.options.points = 24;
  return {{"dataset", {{"synthetic", to_json(spec)}}},
          {"classes_per_stage", 4},
          {"selection", {{"name", "fusion"}, {"exemplars_per_class", 3}, {"affinity_k", 3}, {"kmeans_restarts", 2}}},
          {"train", {{"epochs", 1}, {"feature_width", 8}}},
          {"output_dir", out_dir.string()},
          {"seed", 5}};
}

std::string write_config(const std::filesystem::path& dir, const nlohmann::json& j, const std::string& name = "c.json") {
  const auto path = dir / name;
  std::ofstream(path) << j.dump(2);
  return path.string();
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  test::TempDir dir("cfg");
  const nlohmann::json base = tiny_config(dir.path() / "out");
  const ExperimentConfig c = parse_experiment_config(base);
  CHECK(c.selection.exemplars_per_class == 3);
  CHECK(c.train.epochs == 1);
  CHECK(c.train.batch_size == 32);
  CHECK(c.seed == 5);
  CHECK(c.hash() == parse_experiment_config(base).hash());
  nlohmann::json reseeded = base;
  reseeded["seed"] = 6;
  CHECK(c.hash() != parse_experiment_config(reseeded).hash());

  SUBCASE("unknown keys are rejected at any depth") {
    nlohmann::json bad = base;
    bad["learning_rate"] = 0.1;
    CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
    bad = base;
    bad["train"]["momentum"] = 0.9;
    try {
      parse_experiment_config(bad);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("momentum") != std::string::npos);
    }
  }
  SUBCASE("dataset needs exactly one source") {
    nlohmann::json bad = base;
    bad["dataset"]["builtin"] = "benchmark";
    CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
    bad["dataset"] = {{"builtin", "modelnet"}};
    CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  }
  SUBCASE("values are validated") {
    nlohmann::json bad = base;
    bad["train"]["epochs"] = "ten";
    CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
    bad = base;
    bad["selection"]["name"] = "best";
    CHECK_THROWS_AS(parse_experiment_config(bad), ConfigError);
  }
  SUBCASE("the schema lists the top-level keys") {
    const auto schema = experiment_config_schema();
    CHECK(schema["properties"].contains("selection"));
    CHECK(schema["additionalProperties"] == false);
  }
}

TEST_CASE("exit codes and error lines") {
  test::TempDir dir("cli_err");
  nlohmann::json bad = tiny_config(dir.path() / "out");
  bad["colour"] = "red";
  const CliResult r = cli({"run", "-c", write_config(dir.path(), bad)});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.rfind("error: kind=config exit=2 message=", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  CHECK(cli({"run"}).code == kExitConfig);
  CHECK(cli({"run", "-c", (dir.path() / "missing.json").string()}).code == kExitConfig);

  nlohmann::json manifest = tiny_config(dir.path() / "out");
  manifest["dataset"] = {{"manifest", (dir.path() / "nowhere" / "manifest.json").string()}};
  CHECK(cli({"run", "-c", write_config(dir.path(), manifest, "m.json")}).code == kExitData);

  const CliResult no_model = cli({"select", "-c", write_config(dir.path(), tiny_config(dir.path() / "out"))});
  CHECK(no_model.code == kExitConfig);
  CHECK(no_model.err.find("model required") != std::string::npos);

  CHECK(exit_code_for(ErrorKind::Numerical) == kExitNumerical);
}

TEST_CASE("the installed binary reports the same exit codes") {
  test::TempDir dir("cli_bin");
  nlohmann::json bad = tiny_config(dir.path() / "out");
  bad["unexpected"] = 1;
  const std::string cmd = std::string(CL3D_CLI_PATH) + " run -c " + write_config(dir.path(), bad) + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == kExitConfig);
}

TEST_CASE("gen-synth is reproducible") {
  test::TempDir dir("cli_gen");
  SyntheticDatasetSpec spec = builtin_benchmark_spec(0);
  spec.train_per_class = 3;
  spec.test_per_class = 2;
  spec.options.points = 16;
  std::ofstream(dir.path() / "spec.json") << to_json(spec).dump();
  const std::string spec_path = (dir.path() / "spec.json").string();
  REQUIRE(cli({"gen-synth", "--spec", spec_path, "-o", (dir.path() / "a").string(), "--seed", "4"}).code == 0);
  REQUIRE(cli({"gen-synth", "--spec", spec_path, "-o", (dir.path() / "b").string(), "--seed", "4"}).code == 0);
  CHECK(slurp(dir.path() / "a" / "manifest.json") == slurp(dir.path() / "b" / "manifest.json"));
  CHECK(slurp(dir.path() / "a" / "generation.json") == slurp(dir.path() / "b" / "generation.json"));

  const Dataset ds = load_dataset(dir.path() / "a" / "manifest.json");
  CHECK(ds.num_classes() == 8);
  CHECK(cli({"gen-synth", "-o", (dir.path() / "c").string()}).code == kExitConfig);
}

TEST_CASE("run, select and export") {
  test::TempDir dir("cli_run");
  const auto out = dir.path() / "out";
  const std::string cfg = write_config(dir.path(), tiny_config(out));

  const CliResult run = cli({"run", "-c", cfg, "--with-joint"});
  REQUIRE(run.code == 0);
  const std::string csv = slurp(out / "report.csv");
  CHECK(csv.find("\nfusion,") != std::string::npos);
  CHECK(csv.find("\njoint,") != std::string::npos);
  CHECK(csv.find("config_hash=") != std::string::npos);
  REQUIRE(std::filesystem::exists(out / "model.ckpt"));

  SUBCASE("flags override the config") {
    REQUIRE(cli({"run", "-c", cfg, "--seed", "9", "-o", (dir.path() / "out9").string()}).code == 0);
    CHECK(slurp(dir.path() / "out9" / "report.csv").find("seed=9") != std::string::npos);
  }
  SUBCASE("reruns are byte-identical") {
    REQUIRE(cli({"run", "-c", cfg, "--with-joint", "-o", (dir.path() / "again").string()}).code == 0);
    CHECK(slurp(dir.path() / "again" / "report.csv") == csv);
  }
  SUBCASE("selection with the trained model") {
    const CliResult sel = cli({"select", "-c", cfg, "--model", (out / "model.ckpt").string(), "--class", "ring"});
    REQUIRE(sel.code == 0);
    nlohmann::json j;
    std::ifstream(out / "exemplars.json") >> j;
    CHECK(j["classes"].size() == 1);
    CHECK(j["classes"]["ring"]["exemplar_ids"].size() == 3);
    CHECK(j.contains("config_hash"));
  }
  SUBCASE("embedding export joins on sample ids") {
    const CliResult e =
        cli({"export-embeddings", "-c", cfg, "--model", (out / "model.ckpt").string(), "--class", "ring"});
    REQUIRE(e.code == 0);
    std::ifstream in(out / "embeddings_ring.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# config_hash=", 0) == 0);
    std::getline(in, line);
    CHECK(line == "sample_id,v1,v2,v3,domain_tag");
    std::map<std::string, int> rows_per_domain;
    std::map<std::string, std::set<std::string>> ids;
    while (std::getline(in, line)) {
      const std::string domain = line.substr(line.rfind(',') + 1);
      ++rows_per_domain[domain];
      ids[domain].insert(line.substr(0, line.find(',')));
    }
    CHECK(rows_per_domain == std::map<std::string, int>{{"global", 6}, {"input", 6}, {"local", 6}});
    CHECK(ids["input"] == ids["global"]);
    CHECK(cli({"export-embeddings", "-c", cfg, "--class", "nope"}).code == kExitData);
  }
}

TEST_CASE("compare") {
  test::TempDir dir("cli_cmp");
  const auto out = dir.path() / "out";
  const std::string cfg = write_config(dir.path(), tiny_config(out));
  REQUIRE(cli({"compare", "-c", cfg, "--methods", "herding", "random"}).code == 0);
  const std::string csv = slurp(out / "compare.csv");
  for (const char* m : {"\nherding,", "\nrandom,", "\njoint,", "\nmemory,"}) CHECK(csv.find(m) != std::string::npos);
}

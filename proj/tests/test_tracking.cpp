#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "tabkit/ops.hpp"
#include "tabkit/tracking.hpp"

using namespace tabkit;
namespace cfg = tabkit::config;

namespace {

cfg::ConfigBundle tiny_bundle(const std::string& project,
                              const std::string& log_dir) {
  cfg::DataConfig data;
  data.target = {"y"};
  cfg::ModelConfig model;
  cfg::ExperimentConfig experiment;
  experiment.project_name = project;
  experiment.log_dir = log_dir;
  return cfg::validate(data, model, {}, {}, experiment);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  return lines;
}

}  // namespace

TEST_CASE("start_run creates distinct directories and snapshots") {
  const auto root = std::filesystem::temp_directory_path() / "tabkit_runs";
  std::filesystem::remove_all(root);
  const auto bundle = tiny_bundle("proj", root.string());

  auto run1 = tracking::RunHandle::start_run(bundle.experiment(), bundle);
  auto run2 = tracking::RunHandle::start_run(bundle.experiment(), bundle);
  CHECK(run1.dir() != run2.dir());
  CHECK(std::filesystem::exists(run1.dir() / "config.yaml"));
  CHECK(std::filesystem::exists(run1.dir() / "meta.json"));
  CHECK(std::filesystem::exists(run1.dir() / "metrics.jsonl"));

  // The snapshot parses back into an equal bundle.
  const auto reparsed =
      cfg::validate(cfg::load_config_file(run1.dir() / "config.yaml"));
  CHECK(reparsed == bundle);

  std::ifstream meta(run1.dir() / "meta.json");
  const auto meta_json = nlohmann::json::parse(meta);
  CHECK(meta_json.at("seed").get<std::uint64_t>() == 42);
  CHECK(meta_json.at("project_name") == "proj");
  std::filesystem::remove_all(root);
}

TEST_CASE("unwritable log dir raises IoError") {
  cfg::ExperimentConfig experiment;
  experiment.project_name = "p";
  experiment.log_dir = "/dev/null/nope";
  const auto bundle = tiny_bundle("p", "/dev/null/nope");
  CHECK_THROWS_AS(tracking::RunHandle::start_run(experiment, bundle), IoError);
}

TEST_CASE("log_metric appends one valid JSON object per call") {
  const auto root = std::filesystem::temp_directory_path() / "tabkit_runs2";
  std::filesystem::remove_all(root);
  const auto bundle = tiny_bundle("proj", root.string());
  auto run = tracking::RunHandle::start_run(bundle.experiment(), bundle);

  for (std::size_t epoch = 1; epoch <= 3; ++epoch) {
    for (const char* split : {"train", "val"}) {
      tracking::MetricsRecord record;
      record.epoch = epoch;
      record.step = epoch * 10;
      record.split = split;
      record.name = "loss";
      record.value = 1.0 / static_cast<double>(epoch);
      run.log_metric(record);
    }
  }
  run.flush();

  const auto lines = read_jsonl(run.dir() / "metrics.jsonl");
  REQUIRE(lines.size() == 6);
  for (const auto& line : lines) {
    CHECK(line.size() == 7);
    for (const char* key :
         {"run_id", "epoch", "step", "split", "name", "value", "wall_time"}) {
      CHECK(line.contains(key));
    }
  }
  CHECK(lines[0].at("split") == "train");
  CHECK(lines[1].at("split") == "val");
  CHECK(lines[4].at("epoch") == 3);

  tracking::MetricsRecord bad;
  bad.split = "train";
  bad.name = "loss";
  bad.value = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(run.log_metric(bad), InvalidValue);
  run.flush();
  CHECK(read_jsonl(run.dir() / "metrics.jsonl").size() == 6);
  std::filesystem::remove_all(root);
}

TEST_CASE("gradient norms are logged per parameter") {
  const auto root = std::filesystem::temp_directory_path() / "tabkit_runs3";
  std::filesystem::remove_all(root);
  const auto bundle = tiny_bundle("proj", root.string());
  auto run = tracking::RunHandle::start_run(bundle.experiment(), bundle);

  ad::ParamStore store;
  ad::Tensor p = store.add_parameter("layer.w", ad::Tensor::zeros({2}));
  ad::Tensor weights = ad::Tensor::from_data({2}, {3.0, 4.0});
  ad::backward(ad::sum_all(ad::mul(p, weights)));
  ad::Tensor q = store.add_parameter("layer.b", ad::Tensor::zeros({2}));

  run.log_gradient_norms(store, 1, 5);
  run.flush();
  const auto lines = read_jsonl(run.dir() / "metrics.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].at("name") == "grad_norm/layer.w");
  CHECK(lines[0].at("value").get<double>() == doctest::Approx(5.0));
  CHECK(lines[1].at("name") == "grad_norm/layer.b");
  CHECK(lines[1].at("value").get<double>() == 0.0);  // no grad yet -> zero
  std::filesystem::remove_all(root);
}

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tabkit/tabular_model.hpp"

using namespace tabkit;
namespace cfg = tabkit::config;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Binary classification: label decided by the categorical level.
data::TableFrame separable_frame(std::size_t rows, std::uint64_t seed) {
  static const char* levels[] = {"a", "b", "c", "d"};
  Rng rng(seed);
  std::vector<std::string> cat(rows), y(rows);
  std::vector<double> noise(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t level = rng.uniform_index(4);
    cat[i] = levels[level];
    y[i] = level < 2 ? "no" : "yes";
    noise[i] = rng.uniform(-1, 1);
  }
  data::TableFrame frame;
  frame.add_text_column("cat", cat);
  frame.add_numeric_column("noise", noise);
  frame.add_text_column("y", y);
  return frame;
}

cfg::ConfigBundle small_classifier_bundle(std::uint64_t seed,
                                          const fs::path& workdir,
                                          std::size_t max_epochs = 15) {
  cfg::DataConfig data;
  data.target = {"y"};
  data.categorical_cols = {"cat"};
  data.continuous_cols = {"noise"};
  cfg::ModelConfig model;
  model.task = cfg::Task::kClassification;
  model.learning_rate = 0.02;
  cfg::CategoryEmbeddingConfig ce;
  ce.layer_sizes = {8};
  model.variant = ce;
  cfg::TrainerConfig trainer;
  trainer.batch_size = 32;
  trainer.max_epochs = max_epochs;
  trainer.seed = seed;
  trainer.checkpoint_dir = (workdir / "ckpt").string();
  cfg::ExperimentConfig experiment;
  experiment.project_name = "apitest";
  experiment.log_dir = (workdir / "logs").string();
  experiment.run_name = "run";
  return cfg::validate(data, model, trainer, {}, experiment);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// metrics.jsonl text with wall_time fields removed.
std::string metrics_without_walltime(const fs::path& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_time");
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("fit without a validation frame holds out the configured split") {
  const auto dir = fresh_dir("tabkit_api_split");
  const auto bundle = small_classifier_bundle(5, dir, 3);
  api::TabularModel model(bundle);
  const auto report = model.fit(separable_frame(100, 1));
  CHECK(report.val_rows == 20);
  CHECK(report.train_rows == 80);
  CHECK(model.fitted());

  // A second fit on the same instance is rejected.
  CHECK_THROWS_AS(model.fit(separable_frame(100, 1)), AlreadyFitted);
}

TEST_CASE("an explicit validation frame suppresses the internal split") {
  const auto dir = fresh_dir("tabkit_api_explicit");
  const auto bundle = small_classifier_bundle(6, dir, 3);
  api::TabularModel model(bundle);
  const auto train = separable_frame(90, 2);
  const auto val = separable_frame(30, 3);
  const auto report = model.fit(train, &val);
  CHECK(report.train_rows == 90);
  CHECK(report.val_rows == 30);

  data::TableFrame no_target;
  no_target.add_text_column("cat", {"a", "b"});
  no_target.add_numeric_column("noise", {0.0, 0.1});
  api::TabularModel fresh(small_classifier_bundle(6, dir, 3));
  CHECK_THROWS_AS(fresh.fit(train, &no_target), MissingColumn);
}

TEST_CASE("evaluate and predict contracts") {
  const auto dir = fresh_dir("tabkit_api_eval");
  const auto bundle = small_classifier_bundle(7, dir, 20);
  api::TabularModel model(bundle);
  const auto train = separable_frame(200, 4);
  model.fit(train);

  const auto metrics = model.evaluate(train);
  CHECK(metrics.contains("loss"));
  CHECK(metrics.contains("accuracy"));
  const auto metrics2 = model.evaluate(train);
  CHECK(metrics.at("loss") == metrics2.at("loss"));
  CHECK(metrics.at("accuracy") == metrics2.at("accuracy"));

  data::TableFrame no_target;
  no_target.add_text_column("cat", {"a", "zzz"});
  no_target.add_numeric_column("noise", {0.1, 0.2});
  CHECK_THROWS_AS(model.evaluate(no_target), MissingColumn);

  // Predict works without a target and appends the expected columns.
  const auto preds = model.predict(no_target);
  CHECK(preds.has_column("prob_no"));
  CHECK(preds.has_column("prob_yes"));
  CHECK(preds.has_column("prediction"));
  for (std::size_t r = 0; r < 2; ++r) {
    const double sum = preds.column("prob_no").numbers[r] +
                       preds.column("prob_yes").numbers[r];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    const std::string label = preds.column("prediction").texts[r];
    CHECK((label == "no" || label == "yes"));
  }
}

TEST_CASE("save and load round-trip preserves predictions bit-exactly") {
  const auto dir = fresh_dir("tabkit_api_roundtrip");
  const auto bundle = small_classifier_bundle(8, dir, 6);
  api::TabularModel model(bundle);
  const auto train = separable_frame(120, 5);
  model.fit(train);

  const auto saved = dir / "saved";
  model.save_model(saved);
  CHECK(fs::exists(saved / "config.yaml"));
  CHECK(fs::exists(saved / "pipeline.json"));
  CHECK(fs::exists(saved / "manifest.json"));
  CHECK(fs::exists(saved / "weights.bin"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(saved)) {
    ++files;
  }
  CHECK(files == 4);  // nothing else in a checkpoint directory

  CHECK_THROWS_AS(model.save_model("/dev/null/nope"), IoError);

  auto loaded = api::TabularModel::load_from_checkpoint(saved);
  const auto test = separable_frame(40, 6);
  const auto a = model.predict(test);
  const auto b = loaded.predict(test);
  CHECK(a.column("prob_yes").numbers == b.column("prob_yes").numbers);
  CHECK(a.column("prediction").texts == b.column("prediction").texts);

  const auto ea = model.evaluate(test);
  const auto eb = loaded.evaluate(test);
  CHECK(ea.at("loss") == eb.at("loss"));
  CHECK(ea.at("accuracy") == eb.at("accuracy"));

  // weights.bin length is 8 bytes per stored value.
  auto manifest = nlohmann::json::parse(slurp(saved / "manifest.json"));
  std::size_t total = 0;
  for (const auto& t : manifest.at("tensors")) {
    total += t.at("count").get<std::size_t>();
  }
  CHECK(fs::file_size(saved / "weights.bin") == total * 8);

  // Corrupting the manifest count is detected.
  manifest["tensors"][0]["count"] =
      manifest["tensors"][0]["count"].get<std::size_t>() + 1;
  std::ofstream(saved / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(api::TabularModel::load_from_checkpoint(saved),
                  BadCheckpoint);
}

TEST_CASE("checkpoint format version is enforced") {
  const auto dir = fresh_dir("tabkit_api_version");
  const auto bundle = small_classifier_bundle(9, dir, 2);
  api::TabularModel model(bundle);
  model.fit(separable_frame(60, 7));
  const auto saved = dir / "saved";
  model.save_model(saved);

  auto manifest = nlohmann::json::parse(slurp(saved / "manifest.json"));
  manifest["format_version"] = 99;
  std::ofstream(saved / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(api::TabularModel::load_from_checkpoint(saved),
                  VersionMismatch);
}

TEST_CASE("two fits with the same seed are byte-identical") {
  const auto train = separable_frame(150, 9);
  auto run_once = [&](const std::string& name) {
    const auto dir = fresh_dir(name);
    const auto bundle = small_classifier_bundle(33, dir, 5);
    api::TabularModel model(bundle);
    api::FitOptions options;
    options.run_dir = dir / "run";
    options.checkpoint_dir = dir / "ckpt";
    model.fit(train, nullptr, options);
    model.save_model(dir / "saved");
    return dir;
  };
  const auto d1 = run_once("tabkit_api_det1");
  const auto d2 = run_once("tabkit_api_det2");
  CHECK(slurp(d1 / "saved" / "weights.bin") ==
        slurp(d2 / "saved" / "weights.bin"));
  CHECK(!slurp(d1 / "saved" / "weights.bin").empty());
  CHECK(metrics_without_walltime(d1 / "run" / "metrics.jsonl") ==
        metrics_without_walltime(d2 / "run" / "metrics.jsonl"));
}

TEST_CASE("YAML and programmatic configuration produce identical models") {
  const auto train = separable_frame(100, 11);
  const auto test = separable_frame(30, 12);

  const auto yaml_dir = fresh_dir("tabkit_api_yaml");
  const std::string yaml_text =
      "data: {target: [y], categorical_cols: [cat], continuous_cols: "
      "[noise]}\n"
      "model: {type: category_embedding, task: classification, "
      "learning_rate: 0.02, layer_sizes: [8]}\n"
      "trainer: {batch_size: 32, max_epochs: 4, seed: 21, checkpoint_dir: " +
      (yaml_dir / "ckpt").string() +
      "}\n"
      "experiment: {project_name: apitest, run_name: run, log_dir: " +
      (yaml_dir / "logs").string() + "}\n";
  api::TabularModel yaml_model(cfg::validate(YAML::Load(yaml_text)));
  yaml_model.fit(train);

  const auto prog_dir = fresh_dir("tabkit_api_prog");
  cfg::DataConfig data;
  data.target = {"y"};
  data.categorical_cols = {"cat"};
  data.continuous_cols = {"noise"};
  cfg::ModelConfig model;
  model.task = cfg::Task::kClassification;
  model.learning_rate = 0.02;
  cfg::CategoryEmbeddingConfig ce;
  ce.layer_sizes = {8};
  model.variant = ce;
  cfg::TrainerConfig trainer;
  trainer.batch_size = 32;
  trainer.max_epochs = 4;
  trainer.seed = 21;
  trainer.checkpoint_dir = (prog_dir / "ckpt").string();
  cfg::ExperimentConfig experiment;
  experiment.project_name = "apitest";
  experiment.run_name = "run";
  experiment.log_dir = (prog_dir / "logs").string();
  api::TabularModel prog_model(
      cfg::validate(data, model, trainer, {}, experiment));
  prog_model.fit(train);

  const auto a = yaml_model.predict(test);
  const auto b = prog_model.predict(test);
  CHECK(a.column("prob_yes").numbers == b.column("prob_yes").numbers);
  CHECK(a.column("prediction").texts == b.column("prediction").texts);
}

TEST_CASE("replaying the metric log reproduces the early-stopping trace") {
  const auto dir = fresh_dir("tabkit_api_replay");
  const auto bundle = small_classifier_bundle(12, dir, 30);
  api::TabularModel model(bundle);
  api::FitOptions options;
  options.run_dir = dir / "run";
  const auto report = model.fit(separable_frame(160, 15), nullptr, options);

  // Reconstruct the per-epoch validation losses from metrics.jsonl and
  // re-run the early-stopping rule over them.
  std::ifstream in(dir / "run" / "metrics.jsonl");
  std::string line;
  std::vector<double> val_losses;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("split") == "val" && j.at("name") == "loss") {
      REQUIRE(j.at("epoch").get<std::size_t>() == val_losses.size() + 1);
      val_losses.push_back(j.at("value").get<double>());
    }
  }
  REQUIRE(val_losses.size() == report.epochs_run);

  train::TrainerState replay;
  std::size_t stopped_at = 0;
  for (std::size_t e = 1; e <= val_losses.size(); ++e) {
    replay.epoch = e;
    if (train::early_stop_update(replay, val_losses[e - 1],
                                 bundle.trainer().early_stopping_patience) ==
        train::StopDecision::kStop) {
      stopped_at = e;
      break;
    }
  }
  CHECK(replay.best_epoch == report.best_epoch);
  CHECK(replay.best_val_loss == report.best_val_loss);
  if (report.epochs_run < bundle.trainer().max_epochs) {
    CHECK(stopped_at == report.epochs_run);  // stopped early on both paths
  }
}

TEST_CASE("predict handles unseen categories through the unknown slot") {
  const auto dir = fresh_dir("tabkit_api_unseen");
  const auto bundle = small_classifier_bundle(10, dir, 3);
  api::TabularModel model(bundle);
  model.fit(separable_frame(80, 13));

  data::TableFrame strange;
  strange.add_text_column("cat", {"never-seen", "also-new"});
  strange.add_numeric_column("noise", {100.0, -100.0});
  const auto preds = model.predict(strange);
  for (double v : preds.column("prob_yes").numbers) {
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("unfitted models refuse to evaluate, predict or save") {
  const auto dir = fresh_dir("tabkit_api_unfitted");
  api::TabularModel model(small_classifier_bundle(11, dir));
  data::TableFrame frame = separable_frame(10, 14);
  CHECK_THROWS_AS(model.evaluate(frame), NotFitted);
  CHECK_THROWS_AS(model.predict(frame), NotFitted);
  CHECK_THROWS_AS(model.save_model(dir / "x"), NotFitted);
}

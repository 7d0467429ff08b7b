#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabkit/tabular_model.hpp"

namespace {

int run_fit(const std::string& config_path, const std::string& train_path,
            const std::optional<std::string>& validation_path,
            const std::string& output_dir,
            const std::optional<std::uint64_t>& seed) {
  YAML::Node raw = tabkit::config::load_config_file(config_path);
  if (seed) {
    raw["trainer"]["seed"] = *seed;
  }
  tabkit::config::ConfigBundle bundle = tabkit::config::validate(raw);

  tabkit::data::TableFrame train = tabkit::data::read_csv(train_path);
  std::optional<tabkit::data::TableFrame> validation;
  if (validation_path) {
    validation = tabkit::data::read_csv(*validation_path);
  }

  tabkit::api::TabularModel model(bundle);
  tabkit::api::FitOptions options;
  options.run_dir = output_dir;
  options.checkpoint_dir = output_dir;
  const tabkit::train::FitReport report =
      model.fit(train, validation ? &*validation : nullptr, options);
  model.save_model(output_dir);

  nlohmann::ordered_json summary;
  summary["epochs_run"] = report.epochs_run;
  summary["best_epoch"] = report.best_epoch;
  summary["best_val_loss"] = report.best_val_loss;
  summary["final_metrics"] = report.final_metrics;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_evaluate(const std::string& model_dir, const std::string& data_path) {
  tabkit::api::TabularModel model =
      tabkit::api::TabularModel::load_from_checkpoint(model_dir);
  tabkit::data::TableFrame frame = tabkit::data::read_csv(data_path);
  const auto metrics = model.evaluate(frame);
  std::cout << nlohmann::ordered_json(metrics).dump(2) << "\n";
  return 0;
}

int run_predict(const std::string& model_dir, const std::string& data_path,
                const std::string& out_path) {
  tabkit::api::TabularModel model =
      tabkit::api::TabularModel::load_from_checkpoint(model_dir);
  tabkit::data::TableFrame frame = tabkit::data::read_csv(data_path);
  tabkit::data::TableFrame predictions = model.predict(frame);
  predictions.write_csv(out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Config-driven deep-learning toolkit for tabular data"};
  app.require_subcommand(1);

  std::string config_path, train_path, output_dir, model_dir, data_path,
      out_path;
  std::optional<std::string> validation_path;
  std::optional<std::uint64_t> seed;

  CLI::App* fit = app.add_subcommand("fit", "Train a model and save it");
  fit->add_option("--config", config_path, "YAML config file")->required();
  fit->add_option("--train", train_path, "Training CSV")->required();
  fit->add_option("--validation", validation_path, "Validation CSV");
  fit->add_option("--output-dir", output_dir,
                  "Run directory (checkpoint + metrics.jsonl)")
      ->required();
  fit->add_option("--seed", seed, "Override trainer.seed");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score a saved model on a CSV");
  evaluate->add_option("--model", model_dir, "Checkpoint directory")
      ->required();
  evaluate->add_option("--data", data_path, "CSV with target column")
      ->required();

  CLI::App* predict =
      app.add_subcommand("predict", "Write predictions for a CSV");
  predict->add_option("--model", model_dir, "Checkpoint directory")
      ->required();
  predict->add_option("--data", data_path, "Input CSV")->required();
  predict->add_option("--out", out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (fit->parsed()) {
      return run_fit(config_path, train_path, validation_path, output_dir,
                     seed);
    }
    if (evaluate->parsed()) {
      return run_evaluate(model_dir, data_path);
    }
    return run_predict(model_dir, data_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

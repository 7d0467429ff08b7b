#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>

#include "tabkit/checkpoint.hpp"
#include "tabkit/config.hpp"
#include "tabkit/models.hpp"
#include "tabkit/table.hpp"
#include "tabkit/trainer.hpp"
#include "tabkit/tracking.hpp"

namespace tabkit::api {

struct FitOptions {
  // Write metrics.jsonl/meta.json/config.yaml here instead of
  // log_dir/project/run. Empty = derive from ExperimentConfig.
  std::optional<std::filesystem::path> run_dir;
  // Trainer best-checkpoint location; empty = TrainerConfig.checkpoint_dir.
  std::optional<std::filesystem::path> checkpoint_dir;
  bool enable_tracking = true;
};

// Facade binding configs, data pipeline, model and trainer. fit() may run
// once per instance; evaluate/predict/save need a fitted (or loaded) model.
class TabularModel {
 public:
  explicit TabularModel(config::ConfigBundle bundle);

  // Fits the pipeline on the training portion only, trains with early
  // stopping, and finishes with the best checkpoint restored. When no
  // validation frame is given, validation_split rows are held out at random.
  train::FitReport fit(const data::TableFrame& train,
                       const data::TableFrame* validation = nullptr,
                       const FitOptions& options = {});

  std::map<std::string, double> evaluate(const data::TableFrame& test);

  // Input columns plus prob_<label> columns and `prediction` for
  // classification, or a `prediction` column for regression.
  data::TableFrame predict(const data::TableFrame& frame);

  void save_model(const std::filesystem::path& dir) const;
  static TabularModel load_from_checkpoint(const std::filesystem::path& dir);

  bool fitted() const { return fitted_; }
  const config::ConfigBundle& bundle() const { return bundle_; }
  const data::PipelineState& pipeline() const;
  models::BaseModel& model();

 private:
  config::ConfigBundle bundle_;
  std::optional<data::PipelineState> pipeline_;
  std::unique_ptr<models::BaseModel> model_;
  bool fitted_ = false;
};

}  // namespace tabkit::api

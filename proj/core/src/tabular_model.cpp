#include "tabkit/tabular_model.hpp"

#include <algorithm>
#include <cmath>

namespace tabkit::api {

TabularModel::TabularModel(config::ConfigBundle bundle)
    : bundle_(std::move(bundle)) {}

const data::PipelineState& TabularModel::pipeline() const {
  if (!pipeline_) throw NotFitted();
  return *pipeline_;
}

models::BaseModel& TabularModel::model() {
  if (!model_) throw NotFitted();
  return *model_;
}

train::FitReport TabularModel::fit(const data::TableFrame& train,
                                   const data::TableFrame* validation,
                                   const FitOptions& options) {
  if (fitted_) throw AlreadyFitted();

  const std::uint64_t seed = bundle_.trainer().seed;
  data::TableFrame train_part;
  data::TableFrame val_part;
  if (validation != nullptr) {
    if (!validation->has_column(bundle_.data().target.front())) {
      throw MissingColumn(bundle_.data().target.front());
    }
    train_part = train;
    val_part = *validation;
  } else {
    const auto [train_idx, val_idx] = data::split_train_val(
        train, bundle_.data().validation_split, seed + seed_offset::kSplit);
    train_part = train.select_rows(train_idx);
    val_part = train.select_rows(val_idx);
  }

  const config::ModelKind kind = config::resolve_model(bundle_.model());
  pipeline_ = data::fit_pipeline(train_part, bundle_.data(), kind,
                                 bundle_.model().task, seed);
  const data::EncodedDataset train_ds =
      data::transform(train_part, *pipeline_, data::TransformMode::kTrain);
  const data::EncodedDataset val_ds =
      data::transform(val_part, *pipeline_, data::TransformMode::kInference);

  Rng init_rng(seed + seed_offset::kInit);
  model_ = models::build_model(bundle_, pipeline_->dims(), init_rng);

  std::optional<tracking::RunHandle> run;
  if (options.enable_tracking) {
    run = options.run_dir
              ? tracking::RunHandle::open_at(*options.run_dir, bundle_)
              : tracking::RunHandle::start_run(bundle_.experiment(), bundle_);
  }
  const std::filesystem::path checkpoint_dir = options.checkpoint_dir
                                                   ? *options.checkpoint_dir
                                                   : std::filesystem::path(
                                                         bundle_.trainer()
                                                             .checkpoint_dir);

  train::FitReport report = train::run_training(
      *model_, train_ds, val_ds, bundle_, *pipeline_, checkpoint_dir,
      run ? &*run : nullptr);
  report.train_rows = train_ds.rows;
  report.val_rows = val_ds.rows;
  fitted_ = true;
  return report;
}

std::map<std::string, double> TabularModel::evaluate(
    const data::TableFrame& test) {
  if (!fitted_) throw NotFitted();
  if (!test.has_column(pipeline_->target_column())) {
    throw MissingColumn(pipeline_->target_column());
  }
  const data::EncodedDataset ds =
      data::transform(test, *pipeline_, data::TransformMode::kInference);
  return train::evaluate_epoch(*model_, ds, bundle_).metrics;
}

data::TableFrame TabularModel::predict(const data::TableFrame& frame) {
  if (!fitted_) throw NotFitted();
  const data::EncodedDataset ds =
      data::transform(frame, *pipeline_, data::TransformMode::kInference);

  const std::size_t width = model_->output_width();
  std::vector<double> outputs(ds.rows * width);
  const auto batch_plan =
      data::batches(ds.rows, bundle_.trainer().batch_size, /*shuffle=*/false,
                    0, 0, /*drop_degenerate=*/false);
  for (const auto& rows : batch_plan) {
    const data::EncodedBatch batch = data::gather(ds, rows);
    models::ForwardContext ctx{/*training=*/false, nullptr, nullptr};
    const models::ModelOutput out = model_->forward(batch, ctx);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        outputs[rows[i] * width + j] = out.output.data()[i * width + j];
      }
    }
  }

  data::TableFrame result = frame;
  if (pipeline_->classification()) {
    const auto& labels = pipeline_->target_labels();
    std::vector<std::vector<double>> probs(width,
                                           std::vector<double>(ds.rows));
    std::vector<std::string> predictions(ds.rows);
    for (std::size_t r = 0; r < ds.rows; ++r) {
      const double* row = outputs.data() + r * width;
      const double zmax = *std::max_element(row, row + width);
      double sum = 0.0;
      for (std::size_t j = 0; j < width; ++j) sum += std::exp(row[j] - zmax);
      std::size_t best = 0;
      for (std::size_t j = 0; j < width; ++j) {
        probs[j][r] = std::exp(row[j] - zmax) / sum;
        if (row[j] > row[best]) best = j;
      }
      predictions[r] = labels[best];
    }
    for (std::size_t j = 0; j < width; ++j) {
      result.add_numeric_column("prob_" + labels[j], std::move(probs[j]));
    }
    result.add_text_column("prediction", std::move(predictions));
  } else {
    std::vector<double> predictions(ds.rows);
    for (std::size_t r = 0; r < ds.rows; ++r) predictions[r] = outputs[r];
    result.add_numeric_column("prediction", std::move(predictions));
  }
  return result;
}

void TabularModel::save_model(const std::filesystem::path& dir) const {
  if (!fitted_) throw NotFitted();
  write_checkpoint(dir, bundle_, *pipeline_, model_->params());
}

TabularModel TabularModel::load_from_checkpoint(
    const std::filesystem::path& dir) {
  LoadedCheckpoint loaded = read_checkpoint(dir);
  TabularModel model(loaded.bundle);
  model.pipeline_ = loaded.pipeline;
  Rng init_rng(loaded.bundle.trainer().seed + seed_offset::kInit);
  model.model_ =
      models::build_model(loaded.bundle, loaded.pipeline.dims(), init_rng);
  restore_into(model.model_->params(), loaded);
  model.fitted_ = true;
  return model;
}

}  // namespace tabkit::api

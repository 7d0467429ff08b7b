#include "tabkit/trainer.hpp"

#include <cmath>

#include "tabkit/checkpoint.hpp"

namespace tabkit::train {

StopDecision early_stop_update(TrainerState& state, double val_loss,
                               std::size_t patience, double min_delta) {
  if (val_loss < state.best_val_loss - min_delta) {
    state.best_val_loss = val_loss;
    state.best_epoch = state.epoch;
    state.epochs_since_improvement = 0;
  } else {
    state.epochs_since_improvement += 1;
    if (state.epochs_since_improvement >= patience) {
      state.stop = true;
    }
  }
  return state.stop ? StopDecision::kStop : StopDecision::kContinue;
}

bool model_uses_batch_norm(const config::ConfigBundle& bundle) {
  if (std::holds_alternative<config::TabNetConfig>(bundle.model().variant)) {
    return true;
  }
  if (const auto* ce = std::get_if<config::CategoryEmbeddingConfig>(
          &bundle.model().variant)) {
    return ce->use_batch_norm || !bundle.data().continuous_cols.empty();
  }
  return false;
}

double train_one_epoch(models::BaseModel& model,
                       const data::EncodedDataset& train_ds,
                       const config::ConfigBundle& bundle,
                       OptimizerState& opt, std::uint64_t epoch_index,
                       Rng& dropout_rng, Rng& init_rng,
                       tracking::RunHandle* run, std::size_t& global_step) {
  const auto& trainer_cfg = bundle.trainer();
  const auto batch_plan = data::batches(
      train_ds.rows, trainer_cfg.batch_size, /*shuffle=*/true,
      trainer_cfg.seed + seed_offset::kShuffle, epoch_index,
      model_uses_batch_norm(bundle));
  if (batch_plan.empty()) {
    throw InvalidValue("training", "no usable batches in the epoch");
  }

  const bool log_grad_norms =
      run != nullptr && bundle.experiment().log_gradient_norms;
  double weighted_loss = 0.0;
  std::size_t total_rows = 0;
  for (std::size_t bi = 0; bi < batch_plan.size(); ++bi) {
    const data::EncodedBatch batch = data::gather(train_ds, batch_plan[bi]);
    models::ForwardContext ctx{/*training=*/true, &dropout_rng, &init_rng};
    models::ModelOutput out = model.forward(batch, ctx);
    ad::Tensor loss = models::compute_loss(out, batch, bundle.model());
    const double loss_value = loss.value();
    if (!std::isfinite(loss_value)) throw NonFiniteLoss(bi);

    ad::backward(loss);
    if (log_grad_norms && bi + 1 == batch_plan.size()) {
      run->log_gradient_norms(model.params(), epoch_index + 1, global_step);
    }
    if (trainer_cfg.gradient_clip_norm) {
      clip_gradients(model.params(), *trainer_cfg.gradient_clip_norm);
    }
    optimizer_step(model.params(), opt, bundle.optimizer());

    weighted_loss += loss_value * static_cast<double>(batch.rows);
    total_rows += batch.rows;
    global_step += 1;
  }
  return weighted_loss / static_cast<double>(total_rows);
}

EpochMetrics evaluate_epoch(models::BaseModel& model,
                            const data::EncodedDataset& ds,
                            const config::ConfigBundle& bundle) {
  const auto batch_plan =
      data::batches(ds.rows, bundle.trainer().batch_size, /*shuffle=*/false,
                    0, 0, /*drop_degenerate=*/false);
  EpochMetrics result;
  std::map<std::string, double> weighted;
  double weighted_loss = 0.0;
  std::size_t total_rows = 0;
  for (const auto& rows : batch_plan) {
    const data::EncodedBatch batch = data::gather(ds, rows);
    models::ForwardContext ctx{/*training=*/false, nullptr, nullptr};
    models::ModelOutput out = model.forward(batch, ctx);
    ad::Tensor loss = models::compute_loss(out, batch, bundle.model());
    weighted_loss += loss.value() * static_cast<double>(batch.rows);
    const auto metrics = models::compute_metrics(
        out, batch, bundle.model().metrics, bundle.model().task);
    for (const auto& [name, value] : metrics) {
      weighted[name] += value * static_cast<double>(batch.rows);
    }
    total_rows += batch.rows;
  }
  result.loss = weighted_loss / static_cast<double>(total_rows);
  result.metrics["loss"] = result.loss;
  for (const auto& [name, value] : weighted) {
    result.metrics[name] = value / static_cast<double>(total_rows);
  }
  return result;
}

FitReport run_training(models::BaseModel& model,
                       const data::EncodedDataset& train_ds,
                       const data::EncodedDataset& val_ds,
                       const config::ConfigBundle& bundle,
                       const data::PipelineState& pipeline,
                       const std::filesystem::path& checkpoint_dir,
                       tracking::RunHandle* run) {
  const auto& trainer_cfg = bundle.trainer();
  OptimizerState opt =
      OptimizerState::create(model.params(), bundle.model().learning_rate);
  Rng dropout_rng(trainer_cfg.seed + seed_offset::kDropout);
  Rng init_rng(trainer_cfg.seed + seed_offset::kInit);

  TrainerState state;
  const std::filesystem::path best_dir = checkpoint_dir / "best";
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= trainer_cfg.max_epochs; ++epoch) {
    state.epoch = epoch;
    scheduler_step(opt, bundle.optimizer(), epoch - 1);

    const double train_loss =
        train_one_epoch(model, train_ds, bundle, opt, epoch - 1, dropout_rng,
                        init_rng, run, global_step);
    const EpochMetrics val = evaluate_epoch(model, val_ds, bundle);

    if (run != nullptr) {
      tracking::MetricsRecord record;
      record.epoch = epoch;
      record.step = global_step;
      record.split = "train";
      record.name = "loss";
      record.value = train_loss;
      run->log_metric(record);
      for (const auto& [name, value] : val.metrics) {
        tracking::MetricsRecord vr;
        vr.epoch = epoch;
        vr.step = global_step;
        vr.split = "val";
        vr.name = name;
        vr.value = value;
        run->log_metric(vr);
      }
      run->flush();
    }

    const double previous_best = state.best_val_loss;
    const StopDecision decision = early_stop_update(
        state, val.loss, trainer_cfg.early_stopping_patience);
    if (state.best_val_loss < previous_best) {
      api::write_checkpoint(best_dir, bundle, pipeline, model.params());
      state.best_checkpoint = best_dir;
    }
    if (trainer_cfg.early_stopping && decision == StopDecision::kStop) break;
  }

  // Load the best model back before reporting.
  if (state.best_checkpoint.empty()) throw NoCheckpoint(best_dir.string());
  api::LoadedCheckpoint best = api::read_checkpoint(state.best_checkpoint);
  api::restore_into(model.params(), best);

  FitReport report;
  report.epochs_run = state.epoch;
  report.best_epoch = state.best_epoch;
  report.best_val_loss = state.best_val_loss;
  report.final_metrics = evaluate_epoch(model, val_ds, bundle).metrics;
  return report;
}

}  // namespace tabkit::train

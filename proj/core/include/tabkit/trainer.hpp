#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <string>

#include "tabkit/models.hpp"
#include "tabkit/optimizer.hpp"
#include "tabkit/pipeline.hpp"
#include "tabkit/tracking.hpp"

namespace tabkit::train {

struct TrainerState {
  std::size_t epoch = 0;  // 1-based while running
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_since_improvement = 0;
  bool stop = false;
  std::filesystem::path best_checkpoint;
};

enum class StopDecision { kContinue, kStop };

// Improvement means val_loss < best − min_delta (strict). On improvement the
// counter resets and the best is recorded; otherwise the counter grows, and
// the decision flips to kStop once it reaches `patience`.
StopDecision early_stop_update(TrainerState& state, double val_loss,
                               std::size_t patience, double min_delta = 0.0);

struct EpochMetrics {
  double loss = 0.0;
  std::map<std::string, double> metrics;  // includes "loss"
};

// One optimization pass over the training set. Returns the
// batch-size-weighted mean loss; aborts with NonFiniteLoss on NaN/inf.
double train_one_epoch(models::BaseModel& model,
                       const data::EncodedDataset& train_ds,
                       const config::ConfigBundle& bundle,
                       OptimizerState& opt, std::uint64_t epoch_index,
                       Rng& dropout_rng, Rng& init_rng,
                       tracking::RunHandle* run, std::size_t& global_step);

// Eval-mode pass: batch-size-weighted loss and metrics, no mutation.
EpochMetrics evaluate_epoch(models::BaseModel& model,
                            const data::EncodedDataset& ds,
                            const config::ConfigBundle& bundle);

struct FitReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::map<std::string, double> final_metrics;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
};

// Full training loop: optimization, early stopping on validation loss,
// best-checkpoint tracking, and restore of the best model at the end.
FitReport run_training(models::BaseModel& model,
                       const data::EncodedDataset& train_ds,
                       const data::EncodedDataset& val_ds,
                       const config::ConfigBundle& bundle,
                       const data::PipelineState& pipeline,
                       const std::filesystem::path& checkpoint_dir,
                       tracking::RunHandle* run);

// True when the architecture batch-normalizes activations during training,
// which makes 1-row batches degenerate.
bool model_uses_batch_norm(const config::ConfigBundle& bundle);

}  // namespace tabkit::train

#pragma once

#include <vector>

#include "tabkit/config.hpp"
#include "tabkit/param_store.hpp"

namespace tabkit::train {

// Adam moment accumulators (aligned with the store's entries) plus the
// scheduler-mutable learning rate.
struct OptimizerState {
  std::vector<std::vector<double>> m, v;
  std::size_t step_count = 0;
  double base_lr = 0.0;
  double lr = 0.0;

  static OptimizerState create(const ad::ParamStore& store, double base_lr);
};

// Bias-corrected Adam with decoupled weight decay; zeroes grads afterwards.
void adam_step(ad::ParamStore& params, OptimizerState& opt, double lr,
               double beta1, double beta2, double eps, double weight_decay);

// Plain SGD with decoupled weight decay; zeroes grads afterwards.
void sgd_step(ad::ParamStore& params, OptimizerState& opt, double lr,
              double weight_decay);

void optimizer_step(ad::ParamStore& params, OptimizerState& opt,
                    const config::OptimizerConfig& cfg);

// step_decay: lr = lr₀ · gamma^⌊epoch/step_size⌋ with 0-based epochs.
void scheduler_step(OptimizerState& opt, const config::OptimizerConfig& cfg,
                    std::size_t epoch);

double global_grad_norm(const ad::ParamStore& params);
void clip_gradients(ad::ParamStore& params, double max_norm);

}  // namespace tabkit::train

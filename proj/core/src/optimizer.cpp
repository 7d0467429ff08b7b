#include "tabkit/optimizer.hpp"

#include <cmath>

namespace tabkit::train {

OptimizerState OptimizerState::create(const ad::ParamStore& store,
                                      double base_lr) {
  OptimizerState opt;
  opt.base_lr = base_lr;
  opt.lr = base_lr;
  opt.m.resize(store.entries().size());
  opt.v.resize(store.entries().size());
  for (std::size_t i = 0; i < store.entries().size(); ++i) {
    const auto& e = store.entries()[i];
    if (e.trainable) {
      opt.m[i].assign(e.tensor.size(), 0.0);
      opt.v[i].assign(e.tensor.size(), 0.0);
    }
  }
  return opt;
}

void adam_step(ad::ParamStore& params, OptimizerState& opt, double lr,
               double beta1, double beta2, double eps, double weight_decay) {
  opt.step_count += 1;
  const double t = static_cast<double>(opt.step_count);
  const double bias1 = 1.0 - std::pow(beta1, t);
  const double bias2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    auto& e = params.entries()[i];
    if (!e.trainable) continue;
    ad::Tensor tensor = e.tensor;
    if (!tensor.has_grad()) throw GradMissing(e.name);
    const auto& g = tensor.grad();
    auto& data = tensor.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      opt.m[i][j] = beta1 * opt.m[i][j] + (1.0 - beta1) * g[j];
      opt.v[i][j] = beta2 * opt.v[i][j] + (1.0 - beta2) * g[j] * g[j];
      const double m_hat = opt.m[i][j] / bias1;
      const double v_hat = opt.v[i][j] / bias2;
      data[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      data[j] -= lr * weight_decay * data[j];
    }
    tensor.zero_grad();
  }
}

void sgd_step(ad::ParamStore& params, OptimizerState& opt, double lr,
              double weight_decay) {
  opt.step_count += 1;
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    auto& e = params.entries()[i];
    if (!e.trainable) continue;
    ad::Tensor tensor = e.tensor;
    if (!tensor.has_grad()) throw GradMissing(e.name);
    const auto& g = tensor.grad();
    auto& data = tensor.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      data[j] -= lr * g[j];
      data[j] -= lr * weight_decay * data[j];
    }
    tensor.zero_grad();
  }
}

void optimizer_step(ad::ParamStore& params, OptimizerState& opt,
                    const config::OptimizerConfig& cfg) {
  if (cfg.optimizer == config::OptimizerKind::kAdam) {
    adam_step(params, opt, opt.lr, cfg.beta1, cfg.beta2, cfg.eps,
              cfg.weight_decay);
  } else {
    sgd_step(params, opt, opt.lr, cfg.weight_decay);
  }
}

void scheduler_step(OptimizerState& opt, const config::OptimizerConfig& cfg,
                    std::size_t epoch) {
  if (cfg.scheduler != config::SchedulerKind::kStepDecay) return;
  const double exponent = static_cast<double>(epoch / cfg.step_size);
  opt.lr = opt.base_lr * std::pow(cfg.gamma_decay, exponent);
}

double global_grad_norm(const ad::ParamStore& params) {
  double sq = 0.0;
  for (const auto& e : params.entries()) {
    if (!e.trainable || !e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void clip_gradients(ad::ParamStore& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  for (auto& e : params.entries()) {
    if (!e.trainable || !e.tensor.has_grad()) continue;
    ad::Tensor tensor = e.tensor;
    auto* node = tensor.node();
    for (double& g : node->grad) g *= factor;
  }
}

}  // namespace tabkit::train

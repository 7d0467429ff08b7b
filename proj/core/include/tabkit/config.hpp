#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tabkit/errors.hpp"

namespace tabkit::config {

enum class Task { kClassification, kRegression };
enum class Loss { kCrossEntropy, kMse };
enum class Metric { kAccuracy, kMse };
enum class Normalization { kStandard, kMinMax, kNone };
enum class OptimizerKind { kAdam, kSgd };
enum class SchedulerKind { kNone, kStepDecay };
enum class NodeCategoricalMode { kLeaveOneOut, kEmbedding };

struct DataConfig {
  std::vector<std::string> target;
  std::vector<std::string> continuous_cols;
  std::vector<std::string> categorical_cols;
  Normalization normalization = Normalization::kStandard;
  double validation_split = 0.2;
  // Optional jitter on leave-one-out codes during training; 0 disables.
  double loo_noise_std = 0.0;

  bool operator==(const DataConfig&) const = default;
};

struct CategoryEmbeddingConfig {
  std::vector<std::size_t> layer_sizes = {64, 32};
  double dropout = 0.0;
  bool use_batch_norm = false;
  // Per categorical column; empty means min(50, ceil(cardinality/2)).
  std::vector<std::size_t> embedding_dims;

  bool operator==(const CategoryEmbeddingConfig&) const = default;
};

struct NODEConfig {
  std::size_t num_trees = 16;
  std::size_t depth = 4;
  // Unset means "match the output width".
  std::optional<std::size_t> tree_output_dim;
  std::size_t num_layers = 1;
  NodeCategoricalMode categorical_mode = NodeCategoricalMode::kLeaveOneOut;

  bool operator==(const NODEConfig&) const = default;
};

struct TabNetConfig {
  std::size_t n_d = 8;
  std::size_t n_a = 8;
  std::size_t n_steps = 3;
  double gamma = 1.3;
  std::size_t n_shared_glu = 2;
  std::size_t n_step_glu = 2;
  double lambda_sparse = 1e-4;
  double mask_epsilon = 1e-10;

  bool operator==(const TabNetConfig&) const = default;
};

struct AutoIntConfig {
  std::size_t embed_dim = 16;
  std::size_t num_heads = 2;
  std::size_t num_attn_layers = 2;
  bool use_residual = true;

  bool operator==(const AutoIntConfig&) const = default;
};

using ModelVariant = std::variant<CategoryEmbeddingConfig, NODEConfig,
                                  TabNetConfig, AutoIntConfig>;

struct ModelConfig {
  Task task = Task::kClassification;
  double learning_rate = 1e-3;
  std::optional<Loss> loss;       // filled from task by validate()
  std::vector<Metric> metrics;    // filled from task by validate()
  ModelVariant variant = CategoryEmbeddingConfig{};

  bool operator==(const ModelConfig&) const = default;
};

struct TrainerConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  bool early_stopping = true;
  std::size_t early_stopping_patience = 3;
  std::optional<double> gradient_clip_norm;
  std::uint64_t seed = 42;
  std::string checkpoint_dir = "checkpoints";

  bool operator==(const TrainerConfig&) const = default;
};

struct OptimizerConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  SchedulerKind scheduler = SchedulerKind::kNone;
  std::size_t step_size = 10;
  double gamma_decay = 0.1;

  bool operator==(const OptimizerConfig&) const = default;
};

struct ExperimentConfig {
  std::string project_name = "tabular";
  std::optional<std::string> run_name;
  bool log_gradient_norms = false;
  std::string log_dir = "runs";

  bool operator==(const ExperimentConfig&) const = default;
};

enum class Provenance { kDefault, kUser };

enum class ModelKind {
  kCategoryEmbedding,
  kNodeLeaveOneOut,
  kNodeEmbedding,
  kTabNet,
  kAutoInt,
};

class ConfigBundle;

namespace detail {
ConfigBundle make_bundle(DataConfig data, ModelConfig model,
                         TrainerConfig trainer, OptimizerConfig optimizer,
                         ExperimentConfig experiment,
                         std::map<std::string, Provenance> provenance);
}

// Validated, immutable aggregate of the five configs. Only constructible
// through validate().
class ConfigBundle {
 public:
  const DataConfig& data() const { return data_; }
  const ModelConfig& model() const { return model_; }
  const TrainerConfig& trainer() const { return trainer_; }
  const OptimizerConfig& optimizer() const { return optimizer_; }
  const ExperimentConfig& experiment() const { return experiment_; }

  Loss loss() const { return *model_.loss; }

  // "section.field" -> whether the value came from the user or a default.
  // Exact for YAML input; for programmatic input a field counts as user-set
  // when it differs from the declared default.
  const std::map<std::string, Provenance>& provenance() const {
    return provenance_;
  }

  bool operator==(const ConfigBundle& other) const {
    return data_ == other.data_ && model_ == other.model_ &&
           trainer_ == other.trainer_ && optimizer_ == other.optimizer_ &&
           experiment_ == other.experiment_;
  }

 private:
  friend ConfigBundle detail::make_bundle(DataConfig, ModelConfig,
                                          TrainerConfig, OptimizerConfig,
                                          ExperimentConfig,
                                          std::map<std::string, Provenance>);
  ConfigBundle() = default;

  DataConfig data_;
  ModelConfig model_;
  TrainerConfig trainer_;
  OptimizerConfig optimizer_;
  ExperimentConfig experiment_;
  std::map<std::string, Provenance> provenance_;
};

// Reads and parses a YAML config file. Only checks well-formedness and the
// top-level key set; defaults and invariants are validate()'s job.
YAML::Node load_config_file(const std::filesystem::path& path);

ConfigBundle validate(const YAML::Node& raw);
ConfigBundle validate(DataConfig data, ModelConfig model,
                      TrainerConfig trainer = {},
                      OptimizerConfig optimizer = {},
                      ExperimentConfig experiment = {});

ModelKind resolve_model(const ModelConfig& model);

// Full snapshot with every field explicit; parsing it back through
// validate() reproduces an equal bundle.
std::string to_yaml(const ConfigBundle& bundle);

const char* task_name(Task t);
const char* loss_name(Loss l);
const char* metric_name(Metric m);
std::string model_type_name(const ModelVariant& v);

}  // namespace tabkit::config

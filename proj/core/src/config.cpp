#include "tabkit/config.hpp"

#include <array>
#include <iostream>
#include <set>
#include <utility>

#include "tabkit/strings.hpp"

namespace tabkit::config {

namespace {

template <typename T, std::size_t N>
using EnumTable = std::array<std::pair<const char*, T>, N>;

constexpr EnumTable<Task, 2> kTaskNames{{
    {"classification", Task::kClassification},
    {"regression", Task::kRegression},
}};
constexpr EnumTable<Loss, 2> kLossNames{{
    {"cross_entropy", Loss::kCrossEntropy},
    {"mse", Loss::kMse},
}};
constexpr EnumTable<Metric, 2> kMetricNames{{
    {"accuracy", Metric::kAccuracy},
    {"mse", Metric::kMse},
}};
constexpr EnumTable<Normalization, 3> kNormalizationNames{{
    {"standard", Normalization::kStandard},
    {"minmax", Normalization::kMinMax},
    {"none", Normalization::kNone},
}};
constexpr EnumTable<OptimizerKind, 2> kOptimizerNames{{
    {"adam", OptimizerKind::kAdam},
    {"sgd", OptimizerKind::kSgd},
}};
constexpr EnumTable<SchedulerKind, 2> kSchedulerNames{{
    {"none", SchedulerKind::kNone},
    {"step_decay", SchedulerKind::kStepDecay},
}};
constexpr EnumTable<NodeCategoricalMode, 2> kCategoricalModeNames{{
    {"leave_one_out", NodeCategoricalMode::kLeaveOneOut},
    {"embedding", NodeCategoricalMode::kEmbedding},
}};

template <typename T, std::size_t N>
T parse_enum(const std::string& field, const std::string& s,
             const EnumTable<T, N>& table) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw InvalidValue(field, "unknown value '" + s + "'");
}

template <typename T, std::size_t N>
const char* enum_name(T v, const EnumTable<T, N>& table) {
  for (const auto& [name, value] : table) {
    if (v == value) return name;
  }
  return "?";
}

// Binds one YAML section onto a config struct, tracking which keys the user
// set and rejecting unknown ones.
class SectionBinder {
 public:
  SectionBinder(const YAML::Node& root, std::string section,
                std::map<std::string, Provenance>& prov)
      : section_(std::move(section)), prov_(prov) {
    if (root.IsDefined() && root.IsMap()) {
      // A const lookup of a missing key yields an invalid node that
      // reset() rejects, so probe before adopting it.
      YAML::Node found = root[section_];
      if (found.IsDefined()) node_.reset(found);
    }
  }

  bool present() const { return node_.IsDefined() && !node_.IsNull(); }

  YAML::Node get(const std::string& key) {
    known_.insert(key);
    if (!present()) return YAML::Node(YAML::NodeType::Undefined);
    return node_[key];
  }

  void allow(const std::string& key) { known_.insert(key); }

  template <typename Setter>
  void bind(const std::string& key, Setter&& setter) {
    YAML::Node v = get(key);
    if (!v.IsDefined() || v.IsNull()) return;
    try {
      setter(v);
    } catch (const YAML::Exception&) {
      throw InvalidValue(path(key), "could not convert value");
    }
    prov_[path(key)] = Provenance::kUser;
  }

  void bind_double(const std::string& key, double& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<double>(); });
  }
  void bind_optional_double(const std::string& key,
                            std::optional<double>& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<double>(); });
  }
  void bind_size(const std::string& key, std::size_t& out) {
    bind(key, [&](const YAML::Node& v) {
      const long long raw = v.as<long long>();
      if (raw < 0) throw InvalidValue(path(key), "must be non-negative");
      out = static_cast<std::size_t>(raw);
    });
  }
  void bind_optional_size(const std::string& key,
                          std::optional<std::size_t>& out) {
    bind(key, [&](const YAML::Node& v) {
      const long long raw = v.as<long long>();
      if (raw < 0) throw InvalidValue(path(key), "must be non-negative");
      out = static_cast<std::size_t>(raw);
    });
  }
  void bind_u64(const std::string& key, std::uint64_t& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<unsigned long long>(); });
  }
  void bind_bool(const std::string& key, bool& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<bool>(); });
  }
  void bind_string(const std::string& key, std::string& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<std::string>(); });
  }
  void bind_optional_string(const std::string& key,
                            std::optional<std::string>& out) {
    bind(key, [&](const YAML::Node& v) { out = v.as<std::string>(); });
  }
  void bind_string_list(const std::string& key, std::vector<std::string>& out) {
    bind(key, [&](const YAML::Node& v) {
      out = v.as<std::vector<std::string>>();
    });
  }
  void bind_size_list(const std::string& key, std::vector<std::size_t>& out) {
    bind(key, [&](const YAML::Node& v) {
      out.clear();
      for (const auto& e : v.as<std::vector<long long>>()) {
        if (e < 0) throw InvalidValue(path(key), "entries must be non-negative");
        out.push_back(static_cast<std::size_t>(e));
      }
    });
  }
  template <typename T, std::size_t N>
  void bind_enum(const std::string& key, T& out, const EnumTable<T, N>& table) {
    bind(key, [&](const YAML::Node& v) {
      out = parse_enum(path(key), v.as<std::string>(), table);
    });
  }

  // Rejects keys that no bind()/allow() claimed.
  void finish() const {
    if (!present()) return;
    if (!node_.IsMap()) throw InvalidValue(section_, "must be a mapping");
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!known_.contains(key)) {
        throw InvalidValue(path(key), "unknown key");
      }
    }
  }

  std::string path(const std::string& key) const { return section_ + "." + key; }

 private:
  YAML::Node node_;
  std::string section_;
  std::map<std::string, Provenance>& prov_;
  std::set<std::string> known_;
};

const std::vector<std::string>& variant_field_names(const ModelVariant& v) {
  static const std::vector<std::string> ce = {"layer_sizes", "dropout",
                                              "use_batch_norm",
                                              "embedding_dims"};
  static const std::vector<std::string> node = {
      "num_trees", "depth", "tree_output_dim", "num_layers",
      "categorical_mode"};
  static const std::vector<std::string> tabnet = {
      "n_d",          "n_a",        "n_steps",       "gamma",
      "n_shared_glu", "n_step_glu", "lambda_sparse", "mask_epsilon"};
  static const std::vector<std::string> autoint = {
      "embed_dim", "num_heads", "num_attn_layers", "use_residual"};
  switch (v.index()) {
    case 0: return ce;
    case 1: return node;
    case 2: return tabnet;
    case 3: return autoint;
  }
  return ce;
}

void init_provenance(std::map<std::string, Provenance>& prov,
                     const ModelVariant& variant) {
  static const std::vector<std::string> fixed = {
      "data.target",
      "data.continuous_cols",
      "data.categorical_cols",
      "data.normalization",
      "data.validation_split",
      "data.loo_noise_std",
      "model.type",
      "model.task",
      "model.learning_rate",
      "model.loss",
      "model.metrics",
      "trainer.batch_size",
      "trainer.max_epochs",
      "trainer.early_stopping",
      "trainer.early_stopping_patience",
      "trainer.gradient_clip_norm",
      "trainer.seed",
      "trainer.checkpoint_dir",
      "optimizer.optimizer",
      "optimizer.beta1",
      "optimizer.beta2",
      "optimizer.eps",
      "optimizer.weight_decay",
      "optimizer.scheduler",
      "optimizer.step_size",
      "optimizer.gamma_decay",
      "experiment.project_name",
      "experiment.run_name",
      "experiment.log_gradient_norms",
      "experiment.log_dir",
  };
  for (const auto& f : fixed) prov.emplace(f, Provenance::kDefault);
  for (const auto& f : variant_field_names(variant)) {
    prov.emplace("model." + f, Provenance::kDefault);
  }
}

ModelVariant variant_for_type(const std::string& type) {
  if (type == "category_embedding") return CategoryEmbeddingConfig{};
  if (type == "node") return NODEConfig{};
  if (type == "tabnet") return TabNetConfig{};
  if (type == "autoint") return AutoIntConfig{};
  throw UnknownModelType(type);
}

void check_positive(double v, const char* field) {
  if (!(v > 0.0)) throw InvalidValue(field, "must be > 0");
}

void check_dim(std::size_t v, const char* field) {
  if (v < 1) throw InvalidValue(field, "must be >= 1");
}

ConfigBundle finalize(DataConfig data, ModelConfig model, TrainerConfig trainer,
                      OptimizerConfig optimizer, ExperimentConfig experiment,
                      std::map<std::string, Provenance> prov) {
  // Column roles must be pairwise disjoint (and free of duplicates).
  std::set<std::string> seen;
  for (const auto* cols :
       {&data.target, &data.continuous_cols, &data.categorical_cols}) {
    for (const auto& c : *cols) {
      if (!seen.insert(c).second) throw DisjointnessViolation(c);
    }
  }
  if (data.target.empty()) {
    throw InvalidValue("data.target", "must name at least one column");
  }
  if (!(data.validation_split > 0.0 && data.validation_split < 1.0)) {
    throw InvalidValue("data.validation_split", "must lie in (0, 1)");
  }
  if (data.loo_noise_std < 0.0) {
    throw InvalidValue("data.loo_noise_std", "must be >= 0");
  }

  check_positive(model.learning_rate, "model.learning_rate");
  if (!model.loss.has_value()) {
    model.loss = model.task == Task::kClassification ? Loss::kCrossEntropy
                                                     : Loss::kMse;
  } else {
    const bool compatible =
        (*model.loss == Loss::kCrossEntropy &&
         model.task == Task::kClassification) ||
        (*model.loss == Loss::kMse && model.task == Task::kRegression);
    if (!compatible) {
      throw IncompatibleLossTask(loss_name(*model.loss),
                                 task_name(model.task));
    }
  }
  if (model.metrics.empty() &&
      prov.at("model.metrics") == Provenance::kDefault) {
    model.metrics = {model.task == Task::kClassification ? Metric::kAccuracy
                                                         : Metric::kMse};
  }

  bool model_uses_batch_norm = false;
  if (const auto* ce = std::get_if<CategoryEmbeddingConfig>(&model.variant)) {
    for (std::size_t s : ce->layer_sizes) check_dim(s, "model.layer_sizes");
    for (std::size_t s : ce->embedding_dims) {
      check_dim(s, "model.embedding_dims");
    }
    if (!ce->embedding_dims.empty() &&
        ce->embedding_dims.size() != data.categorical_cols.size()) {
      throw InvalidValue("model.embedding_dims",
                         "must list one dimension per categorical column");
    }
    if (!(ce->dropout >= 0.0 && ce->dropout < 1.0)) {
      throw InvalidValue("model.dropout", "must lie in [0, 1)");
    }
    model_uses_batch_norm =
        ce->use_batch_norm || !data.continuous_cols.empty();
  } else if (const auto* node = std::get_if<NODEConfig>(&model.variant)) {
    check_dim(node->num_trees, "model.num_trees");
    check_dim(node->depth, "model.depth");
    check_dim(node->num_layers, "model.num_layers");
    if (node->tree_output_dim) {
      check_dim(*node->tree_output_dim, "model.tree_output_dim");
    }
  } else if (const auto* tn = std::get_if<TabNetConfig>(&model.variant)) {
    check_dim(tn->n_d, "model.n_d");
    check_dim(tn->n_a, "model.n_a");
    check_dim(tn->n_steps, "model.n_steps");
    if (tn->gamma < 1.0) throw InvalidValue("model.gamma", "must be >= 1");
    if (tn->n_shared_glu + tn->n_step_glu < 1) {
      throw InvalidValue("model.n_shared_glu",
                         "needs at least one GLU block overall");
    }
    if (tn->lambda_sparse < 0.0) {
      throw InvalidValue("model.lambda_sparse", "must be >= 0");
    }
    check_positive(tn->mask_epsilon, "model.mask_epsilon");
    model_uses_batch_norm = true;
  } else if (const auto* ai = std::get_if<AutoIntConfig>(&model.variant)) {
    check_dim(ai->embed_dim, "model.embed_dim");
    check_dim(ai->num_heads, "model.num_heads");
    check_dim(ai->num_attn_layers, "model.num_attn_layers");
  }

  check_dim(trainer.batch_size, "trainer.batch_size");
  check_dim(trainer.max_epochs, "trainer.max_epochs");
  check_dim(trainer.early_stopping_patience,
            "trainer.early_stopping_patience");
  if (trainer.gradient_clip_norm) {
    check_positive(*trainer.gradient_clip_norm, "trainer.gradient_clip_norm");
  }
  if (model_uses_batch_norm && trainer.batch_size < 2) {
    throw InvalidValue("trainer.batch_size",
                       "must be >= 2 for models that batch-normalize in "
                       "training");
  }

  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) {
    throw InvalidValue("optimizer.beta1", "must lie in [0, 1)");
  }
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw InvalidValue("optimizer.beta2", "must lie in [0, 1)");
  }
  check_positive(optimizer.eps, "optimizer.eps");
  if (optimizer.weight_decay < 0.0) {
    throw InvalidValue("optimizer.weight_decay", "must be >= 0");
  }
  if (optimizer.scheduler == SchedulerKind::kStepDecay) {
    check_dim(optimizer.step_size, "optimizer.step_size");
    check_positive(optimizer.gamma_decay, "optimizer.gamma_decay");
  }

  if (experiment.project_name.empty()) {
    throw InvalidValue("experiment.project_name", "must be non-empty");
  }

  return detail::make_bundle(std::move(data), std::move(model),
                             std::move(trainer), std::move(optimizer),
                             std::move(experiment), std::move(prov));
}

void check_top_level_keys(const YAML::Node& root) {
  static const std::set<std::string> known = {"data", "model", "trainer",
                                              "optimizer", "experiment"};
  if (!root.IsDefined() || root.IsNull()) return;
  if (!root.IsMap()) throw MalformedYaml(0, "top level must be a mapping");
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (!known.contains(key)) throw UnknownTopLevelKey(key);
  }
}

}  // namespace

namespace detail {

ConfigBundle make_bundle(DataConfig data, ModelConfig model,
                         TrainerConfig trainer, OptimizerConfig optimizer,
                         ExperimentConfig experiment,
                         std::map<std::string, Provenance> provenance) {
  ConfigBundle bundle;
  bundle.data_ = std::move(data);
  bundle.model_ = std::move(model);
  bundle.trainer_ = std::move(trainer);
  bundle.optimizer_ = std::move(optimizer);
  bundle.experiment_ = std::move(experiment);
  bundle.provenance_ = std::move(provenance);
  return bundle;
}

}  // namespace detail

const char* task_name(Task t) { return enum_name(t, kTaskNames); }
const char* loss_name(Loss l) { return enum_name(l, kLossNames); }
const char* metric_name(Metric m) { return enum_name(m, kMetricNames); }

std::string model_type_name(const ModelVariant& v) {
  switch (v.index()) {
    case 0: return "category_embedding";
    case 1: return "node";
    case 2: return "tabnet";
    case 3: return "autoint";
  }
  return "?";
}

YAML::Node load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFound(path.string());
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::ParserException& e) {
    throw MalformedYaml(e.mark.line + 1, e.msg);
  } catch (const YAML::Exception& e) {
    throw MalformedYaml(0, e.msg);
  }
  if (root.IsNull() || !root.IsDefined()) {
    return YAML::Node(YAML::NodeType::Map);
  }
  check_top_level_keys(root);
  return root;
}

ConfigBundle validate(const YAML::Node& raw) {
  check_top_level_keys(raw);

  DataConfig data;
  ModelConfig model;
  TrainerConfig trainer;
  OptimizerConfig optimizer;
  ExperimentConfig experiment;
  std::map<std::string, Provenance> prov;

  // The model type decides which variant fields exist, so read it first.
  {
    std::string type = "category_embedding";
    if (raw.IsDefined() && raw.IsMap()) {
      YAML::Node section = raw["model"];
      if (section.IsDefined() && section.IsMap() && section["type"]) {
        type = section["type"].as<std::string>();
      }
    }
    model.variant = variant_for_type(type);
  }
  init_provenance(prov, model.variant);

  SectionBinder d(raw, "data", prov);
  d.bind_string_list("target", data.target);
  d.bind_string_list("continuous_cols", data.continuous_cols);
  d.bind_string_list("categorical_cols", data.categorical_cols);
  d.bind_enum("normalization", data.normalization, kNormalizationNames);
  d.bind_double("validation_split", data.validation_split);
  d.bind_double("loo_noise_std", data.loo_noise_std);
  d.finish();

  SectionBinder m(raw, "model", prov);
  m.allow("type");
  if (raw.IsDefined() && raw.IsMap() && raw["model"] &&
      raw["model"].IsMap() && raw["model"]["type"]) {
    prov["model.type"] = Provenance::kUser;
  }
  m.bind_enum("task", model.task, kTaskNames);
  m.bind_double("learning_rate", model.learning_rate);
  m.bind("loss", [&](const YAML::Node& v) {
    model.loss = parse_enum("model.loss", v.as<std::string>(), kLossNames);
  });
  m.bind("metrics", [&](const YAML::Node& v) {
    model.metrics.clear();
    for (const auto& s : v.as<std::vector<std::string>>()) {
      model.metrics.push_back(parse_enum("model.metrics", s, kMetricNames));
    }
  });
  if (auto* ce = std::get_if<CategoryEmbeddingConfig>(&model.variant)) {
    m.bind_size_list("layer_sizes", ce->layer_sizes);
    m.bind_double("dropout", ce->dropout);
    m.bind_bool("use_batch_norm", ce->use_batch_norm);
    m.bind_size_list("embedding_dims", ce->embedding_dims);
  } else if (auto* node = std::get_if<NODEConfig>(&model.variant)) {
    m.bind_size("num_trees", node->num_trees);
    m.bind_size("depth", node->depth);
    m.bind_optional_size("tree_output_dim", node->tree_output_dim);
    m.bind_size("num_layers", node->num_layers);
    m.bind_enum("categorical_mode", node->categorical_mode,
                kCategoricalModeNames);
  } else if (auto* tn = std::get_if<TabNetConfig>(&model.variant)) {
    m.bind_size("n_d", tn->n_d);
    m.bind_size("n_a", tn->n_a);
    m.bind_size("n_steps", tn->n_steps);
    m.bind_double("gamma", tn->gamma);
    m.bind_size("n_shared_glu", tn->n_shared_glu);
    m.bind_size("n_step_glu", tn->n_step_glu);
    m.bind_double("lambda_sparse", tn->lambda_sparse);
    m.bind_double("mask_epsilon", tn->mask_epsilon);
  } else if (auto* ai = std::get_if<AutoIntConfig>(&model.variant)) {
    m.bind_size("embed_dim", ai->embed_dim);
    m.bind_size("num_heads", ai->num_heads);
    m.bind_size("num_attn_layers", ai->num_attn_layers);
    m.bind_bool("use_residual", ai->use_residual);
  }
  m.finish();

  SectionBinder t(raw, "trainer", prov);
  t.bind_size("batch_size", trainer.batch_size);
  t.bind_size("max_epochs", trainer.max_epochs);
  t.bind_bool("early_stopping", trainer.early_stopping);
  t.bind_size("early_stopping_patience", trainer.early_stopping_patience);
  t.bind_optional_double("gradient_clip_norm", trainer.gradient_clip_norm);
  t.bind_u64("seed", trainer.seed);
  t.bind_string("checkpoint_dir", trainer.checkpoint_dir);
  t.allow("gpus");
  if (t.get("gpus").IsDefined()) {
    std::cerr << "warning: trainer.gpus is accepted for compatibility but "
                 "ignored (CPU only)\n";
  }
  t.finish();

  SectionBinder o(raw, "optimizer", prov);
  o.bind_enum("optimizer", optimizer.optimizer, kOptimizerNames);
  o.bind_double("beta1", optimizer.beta1);
  o.bind_double("beta2", optimizer.beta2);
  o.bind_double("eps", optimizer.eps);
  o.bind_double("weight_decay", optimizer.weight_decay);
  o.bind_enum("scheduler", optimizer.scheduler, kSchedulerNames);
  o.bind_size("step_size", optimizer.step_size);
  o.bind_double("gamma_decay", optimizer.gamma_decay);
  o.finish();

  SectionBinder e(raw, "experiment", prov);
  e.bind_string("project_name", experiment.project_name);
  e.bind_optional_string("run_name", experiment.run_name);
  e.bind_bool("log_gradient_norms", experiment.log_gradient_norms);
  e.bind_string("log_dir", experiment.log_dir);
  e.finish();

  return finalize(std::move(data), std::move(model), std::move(trainer),
                  std::move(optimizer), std::move(experiment),
                  std::move(prov));
}

ConfigBundle validate(DataConfig data, ModelConfig model,
                      TrainerConfig trainer, OptimizerConfig optimizer,
                      ExperimentConfig experiment) {
  std::map<std::string, Provenance> prov;
  init_provenance(prov, model.variant);

  // Approximate provenance for programmatic input: a field counts as
  // user-set when it differs from the declared default.
  auto mark = [&prov](const std::string& key, bool user) {
    if (user) prov[key] = Provenance::kUser;
  };
  const DataConfig dd;
  mark("data.target", data.target != dd.target);
  mark("data.continuous_cols", data.continuous_cols != dd.continuous_cols);
  mark("data.categorical_cols", data.categorical_cols != dd.categorical_cols);
  mark("data.normalization", data.normalization != dd.normalization);
  mark("data.validation_split", data.validation_split != dd.validation_split);
  mark("data.loo_noise_std", data.loo_noise_std != dd.loo_noise_std);
  const ModelConfig md;
  mark("model.type", model.variant.index() != md.variant.index());
  mark("model.task", model.task != md.task);
  mark("model.learning_rate", model.learning_rate != md.learning_rate);
  mark("model.loss", model.loss.has_value());
  mark("model.metrics", !model.metrics.empty());
  const TrainerConfig td;
  mark("trainer.batch_size", trainer.batch_size != td.batch_size);
  mark("trainer.max_epochs", trainer.max_epochs != td.max_epochs);
  mark("trainer.early_stopping", trainer.early_stopping != td.early_stopping);
  mark("trainer.early_stopping_patience",
       trainer.early_stopping_patience != td.early_stopping_patience);
  mark("trainer.gradient_clip_norm",
       trainer.gradient_clip_norm != td.gradient_clip_norm);
  mark("trainer.seed", trainer.seed != td.seed);
  mark("trainer.checkpoint_dir", trainer.checkpoint_dir != td.checkpoint_dir);
  const OptimizerConfig od;
  mark("optimizer.optimizer", optimizer.optimizer != od.optimizer);
  mark("optimizer.beta1", optimizer.beta1 != od.beta1);
  mark("optimizer.beta2", optimizer.beta2 != od.beta2);
  mark("optimizer.eps", optimizer.eps != od.eps);
  mark("optimizer.weight_decay", optimizer.weight_decay != od.weight_decay);
  mark("optimizer.scheduler", optimizer.scheduler != od.scheduler);
  mark("optimizer.step_size", optimizer.step_size != od.step_size);
  mark("optimizer.gamma_decay", optimizer.gamma_decay != od.gamma_decay);
  const ExperimentConfig ed;
  mark("experiment.project_name",
       experiment.project_name != ed.project_name);
  mark("experiment.run_name", experiment.run_name != ed.run_name);
  mark("experiment.log_gradient_norms",
       experiment.log_gradient_norms != ed.log_gradient_norms);
  mark("experiment.log_dir", experiment.log_dir != ed.log_dir);

  return finalize(std::move(data), std::move(model), std::move(trainer),
                  std::move(optimizer), std::move(experiment),
                  std::move(prov));
}

ModelKind resolve_model(const ModelConfig& model) {
  if (std::holds_alternative<CategoryEmbeddingConfig>(model.variant)) {
    return ModelKind::kCategoryEmbedding;
  }
  if (const auto* node = std::get_if<NODEConfig>(&model.variant)) {
    return node->categorical_mode == NodeCategoricalMode::kLeaveOneOut
               ? ModelKind::kNodeLeaveOneOut
               : ModelKind::kNodeEmbedding;
  }
  if (std::holds_alternative<TabNetConfig>(model.variant)) {
    return ModelKind::kTabNet;
  }
  return ModelKind::kAutoInt;
}

namespace {

YAML::Node number(double v) {
  YAML::Node n;
  n = format_double(v);
  return n;
}

YAML::Node string_list(const std::vector<std::string>& values) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (const auto& v : values) n.push_back(v);
  return n;
}

YAML::Node size_list(const std::vector<std::size_t>& values) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (auto v : values) n.push_back(v);
  return n;
}

}  // namespace

std::string to_yaml(const ConfigBundle& bundle) {
  YAML::Node root;

  YAML::Node d;
  d["target"] = string_list(bundle.data().target);
  d["continuous_cols"] = string_list(bundle.data().continuous_cols);
  d["categorical_cols"] = string_list(bundle.data().categorical_cols);
  d["normalization"] =
      enum_name(bundle.data().normalization, kNormalizationNames);
  d["validation_split"] = number(bundle.data().validation_split);
  d["loo_noise_std"] = number(bundle.data().loo_noise_std);
  root["data"] = d;

  YAML::Node m;
  m["type"] = model_type_name(bundle.model().variant);
  m["task"] = task_name(bundle.model().task);
  m["learning_rate"] = number(bundle.model().learning_rate);
  m["loss"] = loss_name(bundle.loss());
  std::vector<std::string> metric_names;
  for (Metric metric : bundle.model().metrics) {
    metric_names.emplace_back(metric_name(metric));
  }
  m["metrics"] = string_list(metric_names);
  if (const auto* ce =
          std::get_if<CategoryEmbeddingConfig>(&bundle.model().variant)) {
    m["layer_sizes"] = size_list(ce->layer_sizes);
    m["dropout"] = number(ce->dropout);
    m["use_batch_norm"] = ce->use_batch_norm;
    m["embedding_dims"] = size_list(ce->embedding_dims);
  } else if (const auto* node = std::get_if<NODEConfig>(&bundle.model().variant)) {
    m["num_trees"] = node->num_trees;
    m["depth"] = node->depth;
    if (node->tree_output_dim) m["tree_output_dim"] = *node->tree_output_dim;
    m["num_layers"] = node->num_layers;
    m["categorical_mode"] =
        enum_name(node->categorical_mode, kCategoricalModeNames);
  } else if (const auto* tn = std::get_if<TabNetConfig>(&bundle.model().variant)) {
    m["n_d"] = tn->n_d;
    m["n_a"] = tn->n_a;
    m["n_steps"] = tn->n_steps;
    m["gamma"] = number(tn->gamma);
    m["n_shared_glu"] = tn->n_shared_glu;
    m["n_step_glu"] = tn->n_step_glu;
    m["lambda_sparse"] = number(tn->lambda_sparse);
    m["mask_epsilon"] = number(tn->mask_epsilon);
  } else if (const auto* ai = std::get_if<AutoIntConfig>(&bundle.model().variant)) {
    m["embed_dim"] = ai->embed_dim;
    m["num_heads"] = ai->num_heads;
    m["num_attn_layers"] = ai->num_attn_layers;
    m["use_residual"] = ai->use_residual;
  }
  root["model"] = m;

  YAML::Node t;
  t["batch_size"] = bundle.trainer().batch_size;
  t["max_epochs"] = bundle.trainer().max_epochs;
  t["early_stopping"] = bundle.trainer().early_stopping;
  t["early_stopping_patience"] = bundle.trainer().early_stopping_patience;
  if (bundle.trainer().gradient_clip_norm) {
    t["gradient_clip_norm"] = number(*bundle.trainer().gradient_clip_norm);
  }
  t["seed"] = bundle.trainer().seed;
  t["checkpoint_dir"] = bundle.trainer().checkpoint_dir;
  root["trainer"] = t;

  YAML::Node o;
  o["optimizer"] = enum_name(bundle.optimizer().optimizer, kOptimizerNames);
  o["beta1"] = number(bundle.optimizer().beta1);
  o["beta2"] = number(bundle.optimizer().beta2);
  o["eps"] = number(bundle.optimizer().eps);
  o["weight_decay"] = number(bundle.optimizer().weight_decay);
  o["scheduler"] = enum_name(bundle.optimizer().scheduler, kSchedulerNames);
  o["step_size"] = bundle.optimizer().step_size;
  o["gamma_decay"] = number(bundle.optimizer().gamma_decay);
  root["optimizer"] = o;

  YAML::Node e;
  e["project_name"] = bundle.experiment().project_name;
  if (bundle.experiment().run_name) {
    e["run_name"] = *bundle.experiment().run_name;
  }
  e["log_gradient_norms"] = bundle.experiment().log_gradient_norms;
  e["log_dir"] = bundle.experiment().log_dir;
  root["experiment"] = e;

  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace tabkit::config

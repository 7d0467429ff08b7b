#include "tabkit/models.hpp"

#include <algorithm>
#include <cmath>

namespace tabkit::models {

using ad::Tensor;

Tensor continuous_tensor(const data::EncodedBatch& batch) {
  return Tensor::from_data({batch.rows, batch.n_cont}, batch.cont);
}

Tensor loo_tensor(const data::EncodedBatch& batch) {
  return Tensor::from_data({batch.rows, batch.n_loo}, batch.loo);
}

Tensor target_tensor(const data::EncodedBatch& batch) {
  return Tensor::from_data({batch.rows, 1}, batch.target_values);
}

// --- CategoryEmbeddingModel ---

CategoryEmbeddingModel::CategoryEmbeddingModel(
    const config::CategoryEmbeddingConfig& cfg, const data::DataDims& dims,
    Rng& rng)
    : cfg_(cfg) {
  n_outputs_ = dims.n_outputs;
  std::size_t width = dims.n_continuous;
  for (std::size_t c = 0; c < dims.cat_cardinalities.size(); ++c) {
    const std::size_t dim =
        cfg.embedding_dims.empty()
            ? nn::default_embedding_dim(dims.cat_cardinalities[c])
            : cfg.embedding_dims[c];
    embeddings_.emplace_back(store_, "embedding." + std::to_string(c),
                             dims.cat_cardinalities[c], dim, rng);
    width += dim;
  }
  if (width == 0) {
    throw InvalidValue("model", "no input features configured");
  }
  if (dims.n_continuous > 0) {
    cont_bn_.emplace(store_, "cont_bn", dims.n_continuous);
  }
  for (std::size_t i = 0; i < cfg.layer_sizes.size(); ++i) {
    const std::string name = "hidden." + std::to_string(i);
    hidden_.emplace_back(store_, name, width, cfg.layer_sizes[i], rng);
    if (cfg.use_batch_norm) {
      hidden_bn_.emplace_back(store_, name + ".bn", cfg.layer_sizes[i]);
    }
    width = cfg.layer_sizes[i];
  }
  head_ = nn::Dense(store_, "head", width, n_outputs_, rng);
}

ModelOutput CategoryEmbeddingModel::forward(const data::EncodedBatch& batch,
                                            ForwardContext& ctx) {
  std::vector<Tensor> parts;
  for (std::size_t c = 0; c < embeddings_.size(); ++c) {
    parts.push_back(embeddings_[c](batch.cat_by_col[c]));
  }
  if (batch.n_cont > 0) {
    parts.push_back((*cont_bn_)(continuous_tensor(batch), ctx.training));
  }
  Tensor x = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    x = ad::relu(hidden_[i](x));
    if (cfg_.use_batch_norm) x = hidden_bn_[i](x, ctx.training);
    if (cfg_.dropout > 0.0 && ctx.training) {
      if (ctx.dropout_rng == nullptr) {
        throw InvalidValue("CategoryEmbeddingModel",
                           "training with dropout needs a dropout rng");
      }
      x = ad::dropout(x, cfg_.dropout, true, *ctx.dropout_rng);
    }
  }
  ModelOutput out;
  out.output = head_(x);
  return out;
}

// --- ObliviousTreeLayer ---

ObliviousTreeLayer::ObliviousTreeLayer(ad::ParamStore& store,
                                       const std::string& name,
                                       std::size_t n_in, std::size_t trees,
                                       std::size_t depth, std::size_t out_dim,
                                       Rng& rng)
    : n_in_(n_in), trees_(trees), depth_(depth), out_dim_(out_dim) {
  const std::size_t k = trees * depth;
  const std::size_t leaves = std::size_t{1} << depth;
  sel_logits_ = store.add_parameter(
      name + ".sel_logits", nn::uniform_init({k, n_in}, -0.1, 0.1, rng));
  thresholds_ = store.add_parameter(name + ".thresholds", Tensor::zeros({k}));
  log_tau_ = store.add_parameter(name + ".log_tau", Tensor::zeros({k}));
  responses_ = store.add_parameter(
      name + ".responses",
      nn::normal_init({trees * leaves, out_dim}, 0.01, rng));
  init_flag_ = store.add_buffer(name + ".initialized", Tensor::zeros({1}));
}

void ObliviousTreeLayer::data_aware_init(const Tensor& x, Rng& rng) {
  const std::size_t m = x.rows();
  const std::size_t k = trees_ * depth_;
  // Feature mixtures at the current selection weights, away from the graph.
  Tensor sel = ad::entmax15_rows(Tensor::from_data(sel_logits_.shape(),
                                                   sel_logits_.data()));
  std::vector<double> f(m * k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n_in_; ++j) {
        acc += x.data()[i * n_in_ + j] * sel.data()[kk * n_in_ + j];
      }
      f[i * k + kk] = acc;
    }
  }
  for (std::size_t kk = 0; kk < k; ++kk) {
    const std::size_t pick = rng.uniform_index(m);
    const double b = f[pick * k + kk];
    thresholds_.data()[kk] = b;
    double var = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += f[i * k + kk] - b;
    mean /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double d = f[i * k + kk] - b - mean;
      var += d * d;
    }
    const double stddev = std::sqrt(var / static_cast<double>(m));
    log_tau_.data()[kk] = stddev > 0.0 ? std::log(stddev) : 0.0;
  }
  init_flag_.data()[0] = 1.0;
}

Tensor ObliviousTreeLayer::forward(const Tensor& x, ForwardContext& ctx) {
  if (ctx.training && !initialized()) {
    if (ctx.init_rng == nullptr) {
      throw InvalidValue("ObliviousTreeLayer", "training needs an init rng");
    }
    data_aware_init(x, *ctx.init_rng);
  }
  Tensor sel = ad::entmax15_rows(sel_logits_);           // [K × n_in]
  Tensor mixtures = ad::matmul(x, ad::transpose(sel));   // [m × K]
  Tensor delta = ad::sub_rowvec(mixtures, thresholds_);
  Tensor inv_tau = ad::exp_elem(ad::neg(log_tau_));
  Tensor gates = ad::entmoid15(ad::mul_rowvec(delta, inv_tau));
  Tensor weights = ad::oblivious_leaf_weights(gates, trees_, depth_);
  return ad::grouped_matmul(weights, responses_, trees_);
}

// --- NodeModel ---

NodeModel::NodeModel(const config::NODEConfig& cfg, const data::DataDims& dims,
                     bool learned_embeddings, Rng& rng)
    : cfg_(cfg), learned_embeddings_(learned_embeddings) {
  n_outputs_ = dims.n_outputs;
  trees_ = cfg.num_trees;
  tree_dim_ = cfg.tree_output_dim.value_or(n_outputs_);
  if (tree_dim_ < n_outputs_) {
    throw InvalidValue("model.tree_output_dim",
                       "must be >= the output width " +
                           std::to_string(n_outputs_));
  }
  std::size_t width = dims.n_continuous;
  if (learned_embeddings_) {
    for (std::size_t c = 0; c < dims.cat_cardinalities.size(); ++c) {
      const std::size_t dim =
          nn::default_embedding_dim(dims.cat_cardinalities[c]);
      embeddings_.emplace_back(store_, "embedding." + std::to_string(c),
                               dims.cat_cardinalities[c], dim, rng);
      width += dim;
    }
  } else {
    width += dims.n_loo;
  }
  if (width == 0) {
    throw InvalidValue("model", "no input features configured");
  }
  // Dense-block connectivity: layer ℓ consumes the raw features plus every
  // previous layer's flattened tree responses.
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    layers_.emplace_back(store_, "tree_layer." + std::to_string(l), width,
                         trees_, cfg.depth, tree_dim_, rng);
    width += trees_ * tree_dim_;
  }
}

ModelOutput NodeModel::forward(const data::EncodedBatch& batch,
                               ForwardContext& ctx) {
  std::vector<Tensor> parts;
  if (learned_embeddings_) {
    for (std::size_t c = 0; c < embeddings_.size(); ++c) {
      parts.push_back(embeddings_[c](batch.cat_by_col[c]));
    }
    if (batch.n_cont > 0) parts.push_back(continuous_tensor(batch));
  } else {
    if (batch.n_cont > 0) parts.push_back(continuous_tensor(batch));
    if (batch.n_loo > 0) parts.push_back(loo_tensor(batch));
  }
  Tensor features = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);

  std::vector<Tensor> responses;
  std::vector<Tensor> so_far = {features};
  for (ObliviousTreeLayer& layer : layers_) {
    Tensor input =
        so_far.size() == 1 ? so_far.front() : ad::concat_cols(so_far);
    Tensor resp = layer.forward(input, ctx);  // [m × trees·tree_dim]
    responses.push_back(resp);
    so_far.push_back(resp);
  }

  // Prediction = mean over every tree of every layer of the first
  // n_outputs_ response components.
  Tensor acc;
  for (const Tensor& resp : responses) {
    for (std::size_t t = 0; t < trees_; ++t) {
      Tensor part = ad::slice_cols(resp, t * tree_dim_, n_outputs_);
      acc = acc.defined() ? ad::add(acc, part) : part;
    }
  }
  const double inv = 1.0 / static_cast<double>(trees_ * layers_.size());
  ModelOutput out;
  out.output = ad::scale(acc, inv);
  return out;
}

// --- TabNetModel ---

TabNetModel::TabNetModel(const config::TabNetConfig& cfg,
                         const data::DataDims& dims, Rng& rng)
    : cfg_(cfg) {
  n_outputs_ = dims.n_outputs;
  feat_dim_ = dims.n_continuous;
  for (std::size_t c = 0; c < dims.cat_cardinalities.size(); ++c) {
    const std::size_t dim =
        nn::default_embedding_dim(dims.cat_cardinalities[c]);
    embeddings_.emplace_back(store_, "embedding." + std::to_string(c),
                             dims.cat_cardinalities[c], dim, rng);
    feat_dim_ += dim;
  }
  if (feat_dim_ == 0) {
    throw InvalidValue("model", "no input features configured");
  }
  input_bn_ = nn::BatchNorm(store_, "input_bn", feat_dim_);

  const std::size_t h = cfg.n_d + cfg.n_a;
  for (std::size_t i = 0; i < cfg.n_shared_glu; ++i) {
    const std::size_t in = i == 0 ? feat_dim_ : h;
    shared_blocks_.push_back(
        {nn::Linear(store_, "shared_glu." + std::to_string(i), in, 2 * h, rng),
         nn::BatchNorm(store_, "shared_glu." + std::to_string(i) + ".bn",
                       2 * h)});
  }
  for (std::size_t s = 0; s <= cfg.n_steps; ++s) {
    std::vector<GluBlock> blocks;
    for (std::size_t i = 0; i < cfg.n_step_glu; ++i) {
      const std::size_t in =
          shared_blocks_.empty() && i == 0 ? feat_dim_ : h;
      const std::string name =
          "step." + std::to_string(s) + ".glu." + std::to_string(i);
      blocks.push_back({nn::Linear(store_, name, in, 2 * h, rng),
                        nn::BatchNorm(store_, name + ".bn", 2 * h)});
    }
    step_blocks_.push_back(std::move(blocks));
  }
  for (std::size_t s = 0; s < cfg.n_steps; ++s) {
    const std::string name = "attention." + std::to_string(s);
    att_fc_.emplace_back(store_, name, cfg.n_a, feat_dim_, rng);
    att_bn_.emplace_back(store_, name + ".bn", feat_dim_);
  }
  head_ = nn::Dense(store_, "head", cfg.n_d, n_outputs_, rng);
}

Tensor TabNetModel::feature_transform(std::size_t instance, const Tensor& x,
                                      bool training) {
  constexpr double kResidualScale = 0.7071067811865476;  // 1/√2
  Tensor h;
  bool first = true;
  for (GluBlock& block : shared_blocks_) {
    Tensor in = first ? x : h;
    Tensor out = ad::glu(block.bn(block.fc(in), training));
    h = first ? out : ad::scale(ad::add(h, out), kResidualScale);
    first = false;
  }
  for (GluBlock& block : step_blocks_[instance]) {
    Tensor in = first ? x : h;
    Tensor out = ad::glu(block.bn(block.fc(in), training));
    h = first ? out : ad::scale(ad::add(h, out), kResidualScale);
    first = false;
  }
  return h;
}

ModelOutput TabNetModel::forward(const data::EncodedBatch& batch,
                                 ForwardContext& ctx) {
  std::vector<Tensor> parts;
  for (std::size_t c = 0; c < embeddings_.size(); ++c) {
    parts.push_back(embeddings_[c](batch.cat_by_col[c]));
  }
  if (batch.n_cont > 0) parts.push_back(continuous_tensor(batch));
  Tensor raw = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
  Tensor x = input_bn_(raw, ctx.training);

  ModelOutput out;
  Tensor features = feature_transform(0, x, ctx.training);
  Tensor attention = ad::slice_cols(features, cfg_.n_d, cfg_.n_a);
  Tensor prior = Tensor::full({batch.rows, feat_dim_}, 1.0);
  Tensor decision_sum;
  Tensor entropy_sum;

  for (std::size_t s = 1; s <= cfg_.n_steps; ++s) {
    Tensor logits =
        att_bn_[s - 1](att_fc_[s - 1](attention), ctx.training);
    Tensor mask = ad::sparsemax_rows(ad::mul(logits, prior));
    out.diagnostics.emplace("mask_" + std::to_string(s), mask);
    prior = ad::mul(prior, ad::rsub_scalar(cfg_.gamma, mask));

    Tensor transformed =
        feature_transform(s, ad::mul(mask, x), ctx.training);
    Tensor decision = ad::relu(ad::slice_cols(transformed, 0, cfg_.n_d));
    attention = ad::slice_cols(transformed, cfg_.n_d, cfg_.n_a);
    decision_sum =
        decision_sum.defined() ? ad::add(decision_sum, decision) : decision;

    Tensor entropy = ad::sum_all(ad::neg(
        ad::mul(mask, ad::log_elem(ad::add_scalar(mask, cfg_.mask_epsilon)))));
    entropy_sum =
        entropy_sum.defined() ? ad::add(entropy_sum, entropy) : entropy;
  }

  out.output = head_(decision_sum);
  const double norm = cfg_.lambda_sparse /
                      (static_cast<double>(cfg_.n_steps) *
                       static_cast<double>(batch.rows));
  out.auxiliary_loss = ad::scale(entropy_sum, norm);
  return out;
}

// --- AutoIntModel ---

AutoIntModel::AutoIntModel(const config::AutoIntConfig& cfg,
                           const data::DataDims& dims, Rng& rng)
    : cfg_(cfg) {
  n_outputs_ = dims.n_outputs;
  if (cfg.embed_dim % cfg.num_heads != 0) {
    throw DimensionNotDivisible(cfg.embed_dim, cfg.num_heads);
  }
  n_features_ = dims.cat_cardinalities.size() + dims.n_continuous;
  if (n_features_ == 0) {
    throw InvalidValue("model", "no input features configured");
  }
  const std::size_t d = cfg.embed_dim;
  for (std::size_t c = 0; c < dims.cat_cardinalities.size(); ++c) {
    embeddings_.emplace_back(store_, "embedding." + std::to_string(c),
                             dims.cat_cardinalities[c], d, rng);
  }
  for (std::size_t c = 0; c < dims.n_continuous; ++c) {
    cont_vectors_.push_back(store_.add_parameter(
        "cont_vector." + std::to_string(c),
        nn::normal_init({1, d}, 0.02, rng)));
  }
  const std::size_t dh = d / cfg.num_heads;
  for (std::size_t l = 0; l < cfg.num_attn_layers; ++l) {
    AttnLayer layer;
    for (std::size_t hd = 0; hd < cfg.num_heads; ++hd) {
      const std::string name =
          "attn." + std::to_string(l) + ".head." + std::to_string(hd);
      layer.wq.push_back(
          store_.add_parameter(name + ".wq", nn::glorot_uniform(d, dh, rng)));
      layer.wk.push_back(
          store_.add_parameter(name + ".wk", nn::glorot_uniform(d, dh, rng)));
      layer.wv.push_back(
          store_.add_parameter(name + ".wv", nn::glorot_uniform(d, dh, rng)));
    }
    if (cfg.use_residual) {
      layer.w_res = store_.add_parameter(
          "attn." + std::to_string(l) + ".w_res",
          nn::glorot_uniform(d, d, rng));
    }
    layers_.push_back(std::move(layer));
  }
  head_ = nn::Dense(store_, "head", n_features_ * d, n_outputs_, rng);
}

ModelOutput AutoIntModel::forward(const data::EncodedBatch& batch,
                                  ForwardContext& ctx) {
  (void)ctx;
  std::vector<Tensor> feats;
  for (std::size_t c = 0; c < embeddings_.size(); ++c) {
    feats.push_back(embeddings_[c](batch.cat_by_col[c]));
  }
  Tensor cont;
  if (batch.n_cont > 0) cont = continuous_tensor(batch);
  for (std::size_t c = 0; c < cont_vectors_.size(); ++c) {
    Tensor col = ad::slice_cols(cont, c, 1);          // [m × 1]
    feats.push_back(ad::matmul(col, cont_vectors_[c]));  // value × vector
  }

  ModelOutput out;
  const std::size_t fcount = feats.size();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const AttnLayer& layer = layers_[l];
    std::vector<Tensor> next(fcount);
    std::vector<std::vector<Tensor>> head_outputs(
        fcount);  // per feature, per head
    for (std::size_t hd = 0; hd < cfg_.num_heads; ++hd) {
      std::vector<Tensor> q(fcount), k(fcount), v(fcount);
      for (std::size_t i = 0; i < fcount; ++i) {
        q[i] = ad::matmul(feats[i], layer.wq[hd]);
        k[i] = ad::matmul(feats[i], layer.wk[hd]);
        v[i] = ad::matmul(feats[i], layer.wv[hd]);
      }
      std::vector<Tensor> attn_rows;
      for (std::size_t i = 0; i < fcount; ++i) {
        std::vector<Tensor> scores;
        for (std::size_t j = 0; j < fcount; ++j) {
          scores.push_back(ad::rowwise_sum(ad::mul(q[i], k[j])));
        }
        // Unscaled inner-product attention over the feature axis.
        Tensor weights = ad::softmax_rows(ad::concat_cols(scores));
        attn_rows.push_back(weights);
        Tensor mixed;
        for (std::size_t j = 0; j < fcount; ++j) {
          Tensor term = ad::mul_colvec(v[j], ad::slice_cols(weights, j, 1));
          mixed = mixed.defined() ? ad::add(mixed, term) : term;
        }
        head_outputs[i].push_back(mixed);
      }
      out.diagnostics.emplace(
          "attn_" + std::to_string(l) + "_head_" + std::to_string(hd),
          ad::concat_cols(attn_rows));
    }
    for (std::size_t i = 0; i < fcount; ++i) {
      Tensor combined = head_outputs[i].size() == 1
                            ? head_outputs[i].front()
                            : ad::concat_cols(head_outputs[i]);
      if (cfg_.use_residual) {
        combined = ad::add(combined, ad::matmul(feats[i], layer.w_res));
      }
      next[i] = ad::relu(combined);
    }
    feats = std::move(next);
  }

  Tensor flat = feats.size() == 1 ? feats.front() : ad::concat_cols(feats);
  out.output = head_(flat);
  return out;
}

// --- dispatch / loss / metrics ---

std::unique_ptr<BaseModel> build_model(const config::ConfigBundle& bundle,
                                       const data::DataDims& dims,
                                       Rng& init_rng) {
  const config::ModelKind kind = config::resolve_model(bundle.model());
  switch (kind) {
    case config::ModelKind::kCategoryEmbedding:
      return std::make_unique<CategoryEmbeddingModel>(
          std::get<config::CategoryEmbeddingConfig>(bundle.model().variant),
          dims, init_rng);
    case config::ModelKind::kNodeLeaveOneOut:
      return std::make_unique<NodeModel>(
          std::get<config::NODEConfig>(bundle.model().variant), dims, false,
          init_rng);
    case config::ModelKind::kNodeEmbedding:
      return std::make_unique<NodeModel>(
          std::get<config::NODEConfig>(bundle.model().variant), dims, true,
          init_rng);
    case config::ModelKind::kTabNet:
      return std::make_unique<TabNetModel>(
          std::get<config::TabNetConfig>(bundle.model().variant), dims,
          init_rng);
    case config::ModelKind::kAutoInt:
      return std::make_unique<AutoIntModel>(
          std::get<config::AutoIntConfig>(bundle.model().variant), dims,
          init_rng);
  }
  throw UnknownModelType("unreachable");
}

Tensor compute_loss(const ModelOutput& out, const data::EncodedBatch& batch,
                    const config::ModelConfig& cfg) {
  Tensor task_loss;
  if (*cfg.loss == config::Loss::kCrossEntropy) {
    task_loss = ad::cross_entropy_logits(out.output, batch.target_classes);
  } else {
    task_loss = ad::mse(out.output, target_tensor(batch));
  }
  if (out.auxiliary_loss) {
    task_loss = ad::add(task_loss, *out.auxiliary_loss);
  }
  return task_loss;
}

std::map<std::string, double> compute_metrics(
    const ModelOutput& out, const data::EncodedBatch& batch,
    const std::vector<config::Metric>& metrics, config::Task task) {
  std::map<std::string, double> result;
  for (config::Metric metric : metrics) {
    if (metric == config::Metric::kAccuracy) {
      if (task != config::Task::kClassification) {
        throw MetricTaskMismatch("accuracy", config::task_name(task));
      }
      const std::size_t m = out.output.rows(), c = out.output.cols();
      std::size_t correct = 0;
      for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j) {
          // Strict > keeps ties at the lowest class index.
          if (out.output.data()[i * c + j] > out.output.data()[i * c + best]) {
            best = j;
          }
        }
        if (best == batch.target_classes[i]) ++correct;
      }
      result["accuracy"] =
          static_cast<double>(correct) / static_cast<double>(m);
    } else {
      if (task != config::Task::kRegression) {
        throw MetricTaskMismatch("mse", config::task_name(task));
      }
      const std::size_t m = out.output.rows();
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = out.output.data()[i] - batch.target_values[i];
        acc += d * d;
      }
      result["mse"] = acc / static_cast<double>(m);
    }
  }
  return result;
}

}  // namespace tabkit::models

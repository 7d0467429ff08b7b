#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabkit/config.hpp"
#include "tabkit/nn.hpp"
#include "tabkit/pipeline.hpp"

namespace tabkit::models {

struct ForwardContext {
  bool training = false;
  Rng* dropout_rng = nullptr;  // required when training a dropout model
  Rng* init_rng = nullptr;     // required for NODE data-aware init
};

struct ModelOutput {
  ad::Tensor output;  // [m×C] classification logits or [m×1] regression
  std::optional<ad::Tensor> auxiliary_loss;
  std::map<std::string, ad::Tensor> diagnostics;
};

// A model implements exactly construction and the forward pass; loss and
// metric computation stay generic (auxiliary losses ride along in
// ModelOutput).
class BaseModel {
 public:
  virtual ~BaseModel() = default;
  virtual ModelOutput forward(const data::EncodedBatch& batch,
                              ForwardContext& ctx) = 0;

  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }
  std::size_t output_width() const { return n_outputs_; }

 protected:
  ad::ParamStore store_;
  std::size_t n_outputs_ = 1;
};

// One layer of soft oblivious trees: every tree tests `depth` learned
// feature mixtures against learned thresholds and blends 2^depth leaf
// responses with the resulting gate products.
class ObliviousTreeLayer {
 public:
  ObliviousTreeLayer(ad::ParamStore& store, const std::string& name,
                     std::size_t n_in, std::size_t trees, std::size_t depth,
                     std::size_t out_dim, Rng& rng);

  // [m × n_in] -> [m × trees·out_dim]. The first training call performs
  // data-aware initialization of thresholds and temperatures.
  ad::Tensor forward(const ad::Tensor& x, ForwardContext& ctx);

  bool initialized() const { return init_flag_.data()[0] != 0.0; }

 private:
  void data_aware_init(const ad::Tensor& x, Rng& rng);

  ad::Tensor sel_logits_;  // [trees·depth × n_in]
  ad::Tensor thresholds_;  // [trees·depth]
  ad::Tensor log_tau_;     // [trees·depth]
  ad::Tensor responses_;   // [trees·2^depth × out_dim]
  ad::Tensor init_flag_;   // buffer, 1 after data-aware init
  std::size_t n_in_, trees_, depth_, out_dim_;
};

class CategoryEmbeddingModel : public BaseModel {
 public:
  CategoryEmbeddingModel(const config::CategoryEmbeddingConfig& cfg,
                         const data::DataDims& dims, Rng& rng);
  ModelOutput forward(const data::EncodedBatch& batch,
                      ForwardContext& ctx) override;

 private:
  config::CategoryEmbeddingConfig cfg_;
  std::vector<nn::EmbeddingTable> embeddings_;
  std::optional<nn::BatchNorm> cont_bn_;
  std::vector<nn::Dense> hidden_;
  std::vector<nn::BatchNorm> hidden_bn_;  // used when cfg.use_batch_norm
  nn::Dense head_;
};

class NodeModel : public BaseModel {
 public:
  NodeModel(const config::NODEConfig& cfg, const data::DataDims& dims,
            bool learned_embeddings, Rng& rng);
  ModelOutput forward(const data::EncodedBatch& batch,
                      ForwardContext& ctx) override;

 private:
  config::NODEConfig cfg_;
  bool learned_embeddings_;
  std::vector<nn::EmbeddingTable> embeddings_;
  std::vector<ObliviousTreeLayer> layers_;
  std::size_t trees_, tree_dim_;
};

class TabNetModel : public BaseModel {
 public:
  TabNetModel(const config::TabNetConfig& cfg, const data::DataDims& dims,
              Rng& rng);
  ModelOutput forward(const data::EncodedBatch& batch,
                      ForwardContext& ctx) override;

 private:
  // fc has no bias: its output goes straight into batch norm.
  struct GluBlock {
    nn::Linear fc;
    nn::BatchNorm bn;
  };

  ad::Tensor feature_transform(std::size_t instance, const ad::Tensor& x,
                               bool training);

  config::TabNetConfig cfg_;
  std::vector<nn::EmbeddingTable> embeddings_;
  nn::BatchNorm input_bn_;
  std::vector<GluBlock> shared_blocks_;
  std::vector<std::vector<GluBlock>> step_blocks_;  // n_steps + 1 instances
  std::vector<nn::Linear> att_fc_;
  std::vector<nn::BatchNorm> att_bn_;
  nn::Dense head_;
  std::size_t feat_dim_;
};

class AutoIntModel : public BaseModel {
 public:
  AutoIntModel(const config::AutoIntConfig& cfg, const data::DataDims& dims,
               Rng& rng);
  ModelOutput forward(const data::EncodedBatch& batch,
                      ForwardContext& ctx) override;

 private:
  struct AttnLayer {
    std::vector<ad::Tensor> wq, wk, wv;  // per head, [d × d/H]
    ad::Tensor w_res;
  };

  config::AutoIntConfig cfg_;
  std::vector<nn::EmbeddingTable> embeddings_;
  std::vector<ad::Tensor> cont_vectors_;  // [1 × d] per continuous feature
  std::vector<AttnLayer> layers_;
  nn::Dense head_;
  std::size_t n_features_;
};

std::unique_ptr<BaseModel> build_model(const config::ConfigBundle& bundle,
                                       const data::DataDims& dims,
                                       Rng& init_rng);

// Task loss plus the model's auxiliary loss when present.
ad::Tensor compute_loss(const ModelOutput& out,
                        const data::EncodedBatch& batch,
                        const config::ModelConfig& cfg);

// accuracy (argmax, ties to the lowest class index) and/or mse.
std::map<std::string, double> compute_metrics(
    const ModelOutput& out, const data::EncodedBatch& batch,
    const std::vector<config::Metric>& metrics, config::Task task);

// Constant input tensors for a batch.
ad::Tensor continuous_tensor(const data::EncodedBatch& batch);
ad::Tensor loo_tensor(const data::EncodedBatch& batch);
ad::Tensor target_tensor(const data::EncodedBatch& batch);

}  // namespace tabkit::models

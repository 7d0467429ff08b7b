#pragma once

#include <span>
#include <string>

#include "tabkit/ops.hpp"
#include "tabkit/param_store.hpp"
#include "tabkit/rng.hpp"

namespace tabkit::nn {

using ad::ParamStore;
using ad::Tensor;

// Glorot-uniform weight matrix [fan_in × fan_out].
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_init(ad::Shape shape, double stddev, Rng& rng);
Tensor uniform_init(ad::Shape shape, double lo, double hi, Rng& rng);

// min(50, ceil(cardinality/2)), at least 1.
std::size_t default_embedding_dim(std::size_t cardinality);

struct Dense {
  Tensor w, b;

  Dense() = default;
  Dense(ParamStore& store, const std::string& name, std::size_t in,
        std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const { return ad::affine(x, w, b); }
};

// Bias-free linear map, for layers whose output feeds batch norm (a bias
// would be cancelled by the normalization).
struct Linear {
  Tensor w;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in,
         std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const { return ad::matmul(x, w); }
};

struct BatchNorm {
  Tensor gamma, beta, running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(ParamStore& store, const std::string& name, std::size_t width);

  Tensor operator()(const Tensor& x, bool training) {
    return ad::batch_norm(x, gamma, beta, running_mean, running_var, training,
                          momentum, eps);
  }
};

struct EmbeddingTable {
  Tensor table;  // [cardinality + 1 × dim]; row 0 is the unknown category

  EmbeddingTable() = default;
  EmbeddingTable(ParamStore& store, const std::string& name,
                 std::size_t cardinality, std::size_t dim, Rng& rng);

  std::size_t dim() const { return table.cols(); }
  Tensor operator()(std::span<const std::size_t> indices) const {
    return ad::embedding_lookup(table, indices);
  }
};

}  // namespace tabkit::nn

#include "tabkit/nn.hpp"

#include <algorithm>
#include <cmath>

namespace tabkit::nn {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init({fan_in, fan_out}, -limit, limit, rng);
}

Tensor normal_init(ad::Shape shape, double stddev, Rng& rng) {
  std::vector<double> values(ad::shape_size(shape));
  for (double& v : values) v = stddev * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(values));
}

Tensor uniform_init(ad::Shape shape, double lo, double hi, Rng& rng) {
  std::vector<double> values(ad::shape_size(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(values));
}

std::size_t default_embedding_dim(std::size_t cardinality) {
  const std::size_t half = (cardinality + 1) / 2;
  return std::max<std::size_t>(1, std::min<std::size_t>(50, half));
}

Dense::Dense(ParamStore& store, const std::string& name, std::size_t in,
             std::size_t out, Rng& rng) {
  w = store.add_parameter(name + ".w", glorot_uniform(in, out, rng));
  b = store.add_parameter(name + ".b", Tensor::zeros({out}));
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in,
               std::size_t out, Rng& rng) {
  w = store.add_parameter(name + ".w", glorot_uniform(in, out, rng));
}

BatchNorm::BatchNorm(ParamStore& store, const std::string& name,
                     std::size_t width) {
  gamma = store.add_parameter(name + ".gamma", Tensor::full({width}, 1.0));
  beta = store.add_parameter(name + ".beta", Tensor::zeros({width}));
  running_mean = store.add_buffer(name + ".running_mean", Tensor::zeros({width}));
  running_var = store.add_buffer(name + ".running_var", Tensor::full({width}, 1.0));
}

EmbeddingTable::EmbeddingTable(ParamStore& store, const std::string& name,
                               std::size_t cardinality, std::size_t dim,
                               Rng& rng) {
  table = store.add_parameter(name + ".table",
                              normal_init({cardinality + 1, dim}, 0.02, rng));
}

}  // namespace tabkit::nn

#include <benchmark/benchmark.h>

#include "tabkit/models.hpp"
#include "tabkit/optimizer.hpp"
#include "tabkit/trainer.hpp"

using namespace tabkit;
namespace cfg = tabkit::config;

namespace {

data::EncodedDataset synthetic_dataset(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  data::EncodedDataset ds;
  ds.rows = rows;
  ds.n_cont = 4;
  ds.n_cat = 2;
  ds.cont.resize(rows * 4);
  for (double& v : ds.cont) v = rng.uniform(-1, 1);
  ds.cat.resize(rows * 2);
  for (auto& v : ds.cat) v = rng.uniform_index(5);
  ds.has_target = true;
  ds.target_classes.resize(rows);
  for (auto& t : ds.target_classes) t = rng.uniform_index(2);
  return ds;
}

cfg::ConfigBundle bench_bundle(cfg::ModelVariant variant) {
  cfg::DataConfig data;
  data.target = {"y"};
  data.continuous_cols = {"c0", "c1", "c2", "c3"};
  data.categorical_cols = {"k0", "k1"};
  cfg::ModelConfig model;
  model.variant = std::move(variant);
  cfg::TrainerConfig trainer;
  trainer.batch_size = 64;
  return cfg::validate(data, model, trainer);
}

void BM_TrainEpochCategoryEmbedding(benchmark::State& state) {
  const auto ds = synthetic_dataset(512, 1);
  cfg::CategoryEmbeddingConfig ce;
  ce.layer_sizes = {32, 16};
  const auto bundle = bench_bundle(ce);
  data::DataDims dims;
  dims.n_continuous = 4;
  dims.cat_cardinalities = {4, 4};
  dims.n_outputs = 2;
  Rng init(2);
  auto model = models::build_model(bundle, dims, init);
  auto opt = train::OptimizerState::create(model->params(), 1e-3);
  Rng dropout(3), tree_init(4);
  std::size_t step = 0;
  std::uint64_t epoch = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train::train_one_epoch(
        *model, ds, bundle, opt, epoch++, dropout, tree_init, nullptr, step));
  }
}
BENCHMARK(BM_TrainEpochCategoryEmbedding)->Unit(benchmark::kMillisecond);

void BM_TabNetForward(benchmark::State& state) {
  const auto ds = synthetic_dataset(256, 5);
  cfg::TabNetConfig tc;
  tc.n_d = 8;
  tc.n_a = 8;
  tc.n_steps = 3;
  data::DataDims dims;
  dims.n_continuous = 4;
  dims.cat_cardinalities = {4, 4};
  dims.n_outputs = 2;
  Rng init(6);
  models::TabNetModel model(tc, dims, init);
  const auto batch =
      data::gather(ds, data::batches(ds.rows, 256, false, 0, 0, false)[0]);
  for (auto _ : state) {
    models::ForwardContext ctx{false, nullptr, nullptr};
    benchmark::DoNotOptimize(model.forward(batch, ctx));
  }
}
BENCHMARK(BM_TabNetForward)->Unit(benchmark::kMillisecond);

void BM_NodeForward(benchmark::State& state) {
  const auto ds = synthetic_dataset(256, 7);
  cfg::NODEConfig nc;
  nc.num_trees = 16;
  nc.depth = 4;
  nc.tree_output_dim = 2;
  data::DataDims dims;
  dims.n_continuous = 4;
  dims.cat_cardinalities = {4, 4};
  dims.n_outputs = 2;
  Rng init(8);
  models::NodeModel model(nc, dims, /*learned_embeddings=*/true, init);
  auto batch =
      data::gather(ds, data::batches(ds.rows, 256, false, 0, 0, false)[0]);
  Rng tree_init(9);
  models::ForwardContext warmup{true, nullptr, &tree_init};
  (void)model.forward(batch, warmup);
  for (auto _ : state) {
    models::ForwardContext ctx{false, nullptr, nullptr};
    benchmark::DoNotOptimize(model.forward(batch, ctx));
  }
}
BENCHMARK(BM_NodeForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

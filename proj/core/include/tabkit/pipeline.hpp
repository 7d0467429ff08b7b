#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tabkit/config.hpp"
#include "tabkit/table.hpp"

namespace tabkit::data {

enum class TransformMode { kTrain, kInference };

// Sentinel category standing in for null categorical cells.
inline constexpr const char* kNullCategory = "␀null␀";

struct CategoryStats {
  // Insertion order = first appearance in training data; vocabulary code of
  // categories[i] is i + 1 (0 is reserved for unknown).
  std::vector<std::string> categories;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<double> loo_sum;        // per category target sum
  std::vector<long long> loo_count;   // per category row count
};

struct DataDims {
  std::size_t n_continuous = 0;
  std::vector<std::size_t> cat_cardinalities;  // without the unknown slot
  std::size_t n_loo = 0;
  std::size_t n_outputs = 1;  // classes for classification, 1 for regression
};

struct EncodedDataset {
  std::size_t rows = 0;
  std::size_t n_cont = 0;
  std::size_t n_cat = 0;
  std::size_t n_loo = 0;
  std::vector<double> cont;        // rows × n_cont, row-major
  std::vector<std::size_t> cat;    // rows × n_cat, row-major
  std::vector<double> loo;         // rows × n_loo, row-major
  bool has_target = false;
  std::vector<double> target_values;        // regression
  std::vector<std::size_t> target_classes;  // classification
};

// Row slices of an EncodedDataset, materialized per training step.
struct EncodedBatch {
  std::size_t rows = 0;
  std::size_t n_cont = 0;
  std::size_t n_loo = 0;
  std::vector<double> cont;
  std::vector<std::vector<std::size_t>> cat_by_col;
  std::vector<double> loo;
  bool has_target = false;
  std::vector<double> target_values;
  std::vector<std::size_t> target_classes;
};

// Everything fitted on the training split; applying it to any frame yields
// identical transforms for train, validation, and unseen data.
class PipelineState {
 public:
  bool fitted() const { return fitted_; }
  bool classification() const { return classification_; }
  bool loo_enabled() const { return loo_enabled_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<std::string>& cat_columns() const { return cat_columns_; }
  const std::vector<std::string>& cont_columns() const { return cont_columns_; }
  const std::string& target_column() const { return target_column_; }
  const std::vector<CategoryStats>& cat_stats() const { return cat_stats_; }
  const std::vector<std::string>& target_labels() const { return target_labels_; }
  double global_target_mean() const { return global_target_mean_; }
  double cont_mean(std::size_t i) const { return cont_mean_[i]; }
  double cont_std(std::size_t i) const { return cont_std_[i]; }

  DataDims dims() const;

  // Leave-one-out codes for one categorical column. Training mode excludes
  // each row's own target from its category mean (singletons fall back to
  // the global mean); inference mode uses the full category mean and maps
  // unseen categories to the global mean.
  std::vector<double> encode_leave_one_out(
      std::size_t col_index, const std::vector<std::string>& cat_values,
      const std::vector<double>& target_values, TransformMode mode) const;

  std::string to_json() const;
  static PipelineState from_json(const std::string& text,
                                 const config::DataConfig& cfg,
                                 config::ModelKind kind, config::Task task);

 private:
  friend PipelineState fit_pipeline(const TableFrame&,
                                    const config::DataConfig&,
                                    config::ModelKind, config::Task,
                                    std::uint64_t);
  friend EncodedDataset transform(const TableFrame&, const PipelineState&,
                                  TransformMode);

  std::vector<std::string> cat_columns_;
  std::vector<std::string> cont_columns_;
  std::string target_column_;
  std::vector<CategoryStats> cat_stats_;
  std::vector<double> cont_mean_, cont_std_, cont_min_, cont_max_;
  std::vector<std::string> target_labels_;
  std::unordered_map<std::string, std::size_t> target_index_;
  double global_target_mean_ = 0.0;
  config::Normalization normalization_ = config::Normalization::kStandard;
  double loo_noise_std_ = 0.0;
  bool loo_enabled_ = false;
  bool classification_ = false;
  std::uint64_t seed_ = 0;
  bool fitted_ = false;
};

// Deterministic uniform split: |val| = round(fraction·rows), clamped to
// [1, rows-1]. Both index lists come back sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const TableFrame& frame, double fraction, std::uint64_t seed);

PipelineState fit_pipeline(const TableFrame& train,
                           const config::DataConfig& cfg,
                           config::ModelKind kind, config::Task task,
                           std::uint64_t seed);

EncodedDataset transform(const TableFrame& frame, const PipelineState& state,
                         TransformMode mode);

// Index batches over one epoch. Shuffling is deterministic per
// (seed, epoch); the final partial batch is kept unless it has exactly one
// row and drop_degenerate is set.
std::vector<std::vector<std::size_t>> batches(std::size_t row_count,
                                              std::size_t batch_size,
                                              bool shuffle, std::uint64_t seed,
                                              std::uint64_t epoch,
                                              bool drop_degenerate);

EncodedBatch gather(const EncodedDataset& ds,
                    const std::vector<std::size_t>& rows);

}  // namespace tabkit::data

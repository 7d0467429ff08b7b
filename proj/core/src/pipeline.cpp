#include "tabkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tabkit/rng.hpp"
#include "tabkit/strings.hpp"

namespace tabkit::data {

namespace {

using ordered_json = nlohmann::ordered_json;

// Sub-seed offset for the optional leave-one-out jitter stream.
constexpr std::uint64_t kLooNoiseOffset = 5;

std::string category_key(const Column& col, std::size_t row) {
  if (col.nulls[row]) return kNullCategory;
  return col.cell_text(row);
}

double target_as_double(const PipelineState& state, const Column& col,
                        std::size_t row);

}  // namespace

DataDims PipelineState::dims() const {
  DataDims d;
  d.n_continuous = cont_columns_.size();
  for (const CategoryStats& cs : cat_stats_) {
    d.cat_cardinalities.push_back(cs.categories.size());
  }
  d.n_loo = loo_enabled_ ? cat_columns_.size() : 0;
  d.n_outputs = classification_ ? target_labels_.size() : 1;
  return d;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    const TableFrame& frame, double fraction, std::uint64_t seed) {
  const std::size_t rows = frame.row_count();
  if (rows < 2) throw TooFewRows(rows);
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw InvalidValue("validation_split", "must lie in (0, 1)");
  }
  std::size_t val_count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(rows)));
  val_count = std::clamp<std::size_t>(val_count, 1, rows - 1);

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> val(order.begin(), order.begin() + val_count);
  std::vector<std::size_t> train(order.begin() + val_count, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

PipelineState fit_pipeline(const TableFrame& train,
                           const config::DataConfig& cfg,
                           config::ModelKind kind, config::Task task,
                           std::uint64_t seed) {
  PipelineState state;
  state.cat_columns_ = cfg.categorical_cols;
  state.cont_columns_ = cfg.continuous_cols;
  state.target_column_ = cfg.target.front();
  state.normalization_ = cfg.normalization;
  state.loo_noise_std_ = cfg.loo_noise_std;
  state.loo_enabled_ = kind == config::ModelKind::kNodeLeaveOneOut;
  state.classification_ = task == config::Task::kClassification;
  state.seed_ = seed;

  const std::size_t rows = train.row_count();
  const Column& target = train.column(state.target_column_);
  for (std::size_t r = 0; r < rows; ++r) {
    if (target.nulls[r]) throw NullTarget(r);
  }

  // Classification labels in first-appearance order.
  if (state.classification_) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string label = target.cell_text(r);
      if (!state.target_index_.contains(label)) {
        state.target_index_.emplace(label, state.target_labels_.size());
        state.target_labels_.push_back(label);
      }
    }
  } else if (!target.is_numeric()) {
    throw NonNumericContinuous(state.target_column_);
  }

  // Encoded target values drive the leave-one-out statistics.
  std::vector<double> y(rows);
  double y_sum = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = target_as_double(state, target, r);
    y_sum += y[r];
  }
  state.global_target_mean_ = rows > 0 ? y_sum / static_cast<double>(rows) : 0.0;

  for (const std::string& name : state.cat_columns_) {
    const Column& col = train.column(name);
    CategoryStats cs;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string key = category_key(col, r);
      auto it = cs.index.find(key);
      std::size_t pos;
      if (it == cs.index.end()) {
        pos = cs.categories.size();
        cs.index.emplace(key, pos);
        cs.categories.push_back(key);
        cs.loo_sum.push_back(0.0);
        cs.loo_count.push_back(0);
      } else {
        pos = it->second;
      }
      cs.loo_sum[pos] += y[r];
      cs.loo_count[pos] += 1;
    }
    state.cat_stats_.push_back(std::move(cs));
  }

  for (const std::string& name : state.cont_columns_) {
    const Column& col = train.column(name);
    if (!col.is_numeric()) {
      // A text column can still be all-null; anything else is a type error.
      for (std::size_t r = 0; r < rows; ++r) {
        if (!col.nulls[r]) throw NonNumericContinuous(name);
      }
    }
    double sum = 0.0;
    std::size_t n = 0;
    double lo = 0.0, hi = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (col.nulls[r]) continue;
      const double v = col.numbers[r];
      if (n == 0) {
        lo = hi = v;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      sum += v;
      ++n;
    }
    const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (col.nulls[r]) continue;
      const double d = col.numbers[r] - mean;
      var += d * d;
    }
    // Population (biased) estimator, matching the batch-norm convention.
    const double stddev = n > 0 ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    state.cont_mean_.push_back(mean);
    state.cont_std_.push_back(stddev);
    state.cont_min_.push_back(lo);
    state.cont_max_.push_back(hi);
  }

  state.fitted_ = true;
  return state;
}

std::vector<double> PipelineState::encode_leave_one_out(
    std::size_t col_index, const std::vector<std::string>& cat_values,
    const std::vector<double>& target_values, TransformMode mode) const {
  if (!fitted_) throw NotFitted();
  const CategoryStats& cs = cat_stats_.at(col_index);
  std::vector<double> out(cat_values.size());
  for (std::size_t r = 0; r < cat_values.size(); ++r) {
    auto it = cs.index.find(cat_values[r]);
    if (it == cs.index.end()) {
      out[r] = global_target_mean_;
      continue;
    }
    const double sum = cs.loo_sum[it->second];
    const long long count = cs.loo_count[it->second];
    if (mode == TransformMode::kTrain) {
      out[r] = count <= 1 ? global_target_mean_
                          : (sum - target_values[r]) /
                                static_cast<double>(count - 1);
    } else {
      out[r] = sum / static_cast<double>(count);
    }
  }
  return out;
}

namespace {

double target_as_double(const PipelineState& state, const Column& col,
                        std::size_t row) {
  if (state.classification()) {
    const std::string label = col.cell_text(row);
    const auto& labels = state.target_labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return static_cast<double>(i);
    }
    throw InvalidValue("target", "label '" + label + "' not seen in training");
  }
  return col.numbers[row];
}

}  // namespace

EncodedDataset transform(const TableFrame& frame, const PipelineState& state,
                         TransformMode mode) {
  if (!state.fitted()) throw NotFitted();
  const std::size_t rows = frame.row_count();

  EncodedDataset ds;
  ds.rows = rows;
  ds.n_cont = state.cont_columns().size();
  ds.n_cat = state.cat_columns().size();
  ds.n_loo = state.loo_enabled() ? ds.n_cat : 0;

  // Target first: training mode and the leave-one-out codes need it.
  const bool target_present = frame.has_column(state.target_column());
  if (mode == TransformMode::kTrain && !target_present) {
    throw MissingColumn(state.target_column());
  }
  std::vector<double> y;
  if (target_present) {
    const Column& target = frame.column(state.target_column());
    y.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (target.nulls[r]) throw NullTarget(r);
      y[r] = target_as_double(state, target, r);
    }
    ds.has_target = true;
    if (state.classification()) {
      ds.target_classes.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        ds.target_classes[r] = static_cast<std::size_t>(y[r]);
      }
    } else {
      ds.target_values = y;
    }
  }

  ds.cont.resize(rows * ds.n_cont);
  for (std::size_t c = 0; c < ds.n_cont; ++c) {
    const Column& col = frame.column(state.cont_columns()[c]);
    const double mean = state.cont_mean(c);
    const double stddev = state.cont_std(c);
    for (std::size_t r = 0; r < rows; ++r) {
      double v;
      if (col.nulls[r]) {
        v = mean;  // impute with the training mean
      } else {
        if (!col.is_numeric()) throw NonNumericContinuous(col.name);
        v = col.numbers[r];
      }
      double encoded = 0.0;
      switch (state.normalization_) {
        case config::Normalization::kStandard:
          encoded = stddev > 0.0 ? (v - mean) / stddev : 0.0;
          break;
        case config::Normalization::kMinMax: {
          const double range = state.cont_max_[c] - state.cont_min_[c];
          encoded = range > 0.0 ? (v - state.cont_min_[c]) / range : 0.0;
          break;
        }
        case config::Normalization::kNone:
          encoded = v;
          break;
      }
      ds.cont[r * ds.n_cont + c] = encoded;
    }
  }

  ds.cat.resize(rows * ds.n_cat);
  std::vector<std::vector<std::string>> cat_keys(ds.n_cat);
  for (std::size_t c = 0; c < ds.n_cat; ++c) {
    const Column& col = frame.column(state.cat_columns()[c]);
    const CategoryStats& cs = state.cat_stats()[c];
    cat_keys[c].resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string key = category_key(col, r);
      auto it = cs.index.find(key);
      ds.cat[r * ds.n_cat + c] = it == cs.index.end() ? 0 : it->second + 1;
      cat_keys[c][r] = key;
    }
  }

  if (ds.n_loo > 0) {
    ds.loo.resize(rows * ds.n_loo);
    Rng noise_rng(state.seed() + kLooNoiseOffset);
    const bool add_noise =
        mode == TransformMode::kTrain && state.loo_noise_std_ > 0.0;
    for (std::size_t c = 0; c < ds.n_cat; ++c) {
      std::vector<double> codes =
          state.encode_leave_one_out(c, cat_keys[c], y, mode);
      for (std::size_t r = 0; r < rows; ++r) {
        double v = codes[r];
        if (add_noise) v += state.loo_noise_std_ * noise_rng.normal();
        ds.loo[r * ds.n_loo + c] = v;
      }
    }
  }

  return ds;
}

std::vector<std::vector<std::size_t>> batches(std::size_t row_count,
                                              std::size_t batch_size,
                                              bool shuffle, std::uint64_t seed,
                                              std::uint64_t epoch,
                                              bool drop_degenerate) {
  if (batch_size < 1) throw InvalidValue("batch_size", "must be >= 1");
  std::vector<std::size_t> order(row_count);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(epoch_seed(seed, epoch));
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < row_count; start += batch_size) {
    const std::size_t end = std::min(row_count, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (drop_degenerate && !out.empty() && out.back().size() == 1) {
    out.pop_back();
  }
  return out;
}

EncodedBatch gather(const EncodedDataset& ds,
                    const std::vector<std::size_t>& rows) {
  EncodedBatch b;
  b.rows = rows.size();
  b.n_cont = ds.n_cont;
  b.n_loo = ds.n_loo;
  b.cont.resize(b.rows * ds.n_cont);
  b.loo.resize(b.rows * ds.n_loo);
  b.cat_by_col.assign(ds.n_cat, std::vector<std::size_t>(b.rows));
  b.has_target = ds.has_target;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    std::copy_n(ds.cont.begin() + r * ds.n_cont, ds.n_cont,
                b.cont.begin() + i * ds.n_cont);
    std::copy_n(ds.loo.begin() + r * ds.n_loo, ds.n_loo,
                b.loo.begin() + i * ds.n_loo);
    for (std::size_t c = 0; c < ds.n_cat; ++c) {
      b.cat_by_col[c][i] = ds.cat[r * ds.n_cat + c];
    }
  }
  if (ds.has_target) {
    if (!ds.target_classes.empty()) {
      b.target_classes.resize(b.rows);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        b.target_classes[i] = ds.target_classes[rows[i]];
      }
    }
    if (!ds.target_values.empty()) {
      b.target_values.resize(b.rows);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        b.target_values[i] = ds.target_values[rows[i]];
      }
    }
  }
  return b;
}

std::string PipelineState::to_json() const {
  ordered_json j;
  ordered_json vocab = ordered_json::object();
  for (std::size_t c = 0; c < cat_columns_.size(); ++c) {
    ordered_json col = ordered_json::object();
    const CategoryStats& cs = cat_stats_[c];
    for (std::size_t i = 0; i < cs.categories.size(); ++i) {
      col[cs.categories[i]] = i + 1;
    }
    vocab[cat_columns_[c]] = std::move(col);
  }
  j["vocab"] = std::move(vocab);

  ordered_json loo = ordered_json::object();
  for (std::size_t c = 0; c < cat_columns_.size(); ++c) {
    ordered_json col = ordered_json::object();
    const CategoryStats& cs = cat_stats_[c];
    for (std::size_t i = 0; i < cs.categories.size(); ++i) {
      col[cs.categories[i]] = {cs.loo_sum[i], cs.loo_count[i]};
    }
    loo[cat_columns_[c]] = std::move(col);
  }
  loo["global_mean"] = global_target_mean_;
  j["loo_stats"] = std::move(loo);

  ordered_json cont = ordered_json::object();
  for (std::size_t c = 0; c < cont_columns_.size(); ++c) {
    cont[cont_columns_[c]] = {cont_mean_[c], cont_std_[c]};
  }
  j["cont_stats"] = std::move(cont);

  if (normalization_ == config::Normalization::kMinMax) {
    ordered_json range = ordered_json::object();
    for (std::size_t c = 0; c < cont_columns_.size(); ++c) {
      range[cont_columns_[c]] = {cont_min_[c], cont_max_[c]};
    }
    j["cont_range"] = std::move(range);
  }

  ordered_json tmap = ordered_json::object();
  for (std::size_t i = 0; i < target_labels_.size(); ++i) {
    tmap[target_labels_[i]] = i;
  }
  j["target_map"] = std::move(tmap);
  j["seed"] = seed_;
  return j.dump(2) + "\n";
}

PipelineState PipelineState::from_json(const std::string& text,
                                       const config::DataConfig& cfg,
                                       config::ModelKind kind,
                                       config::Task task) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("pipeline.json: ") + e.what());
  }
  PipelineState state;
  state.cat_columns_ = cfg.categorical_cols;
  state.cont_columns_ = cfg.continuous_cols;
  state.target_column_ = cfg.target.front();
  state.normalization_ = cfg.normalization;
  state.loo_noise_std_ = cfg.loo_noise_std;
  state.loo_enabled_ = kind == config::ModelKind::kNodeLeaveOneOut;
  state.classification_ = task == config::Task::kClassification;
  try {
    state.seed_ = j.at("seed").get<std::uint64_t>();
    const auto& loo = j.at("loo_stats");
    state.global_target_mean_ = loo.at("global_mean").get<double>();
    for (const std::string& name : state.cat_columns_) {
      const auto& vocab_col = j.at("vocab").at(name);
      const auto& loo_col = loo.at(name);
      CategoryStats cs;
      cs.categories.resize(vocab_col.size());
      cs.loo_sum.assign(vocab_col.size(), 0.0);
      cs.loo_count.assign(vocab_col.size(), 0);
      for (const auto& [category, code] : vocab_col.items()) {
        const std::size_t pos = code.get<std::size_t>() - 1;
        if (pos >= cs.categories.size()) {
          throw BadCheckpoint("vocab code out of range for " + name);
        }
        cs.categories[pos] = category;
        cs.index.emplace(category, pos);
        const auto& stats = loo_col.at(category);
        cs.loo_sum[pos] = stats.at(0).get<double>();
        cs.loo_count[pos] = stats.at(1).get<long long>();
      }
      state.cat_stats_.push_back(std::move(cs));
    }
    for (const std::string& name : state.cont_columns_) {
      const auto& stats = j.at("cont_stats").at(name);
      state.cont_mean_.push_back(stats.at(0).get<double>());
      state.cont_std_.push_back(stats.at(1).get<double>());
      if (state.normalization_ == config::Normalization::kMinMax) {
        const auto& range = j.at("cont_range").at(name);
        state.cont_min_.push_back(range.at(0).get<double>());
        state.cont_max_.push_back(range.at(1).get<double>());
      } else {
        state.cont_min_.push_back(0.0);
        state.cont_max_.push_back(0.0);
      }
    }
    if (state.classification_) {
      const auto& tmap = j.at("target_map");
      state.target_labels_.resize(tmap.size());
      for (const auto& [label, index] : tmap.items()) {
        const std::size_t pos = index.get<std::size_t>();
        if (pos >= state.target_labels_.size()) {
          throw BadCheckpoint("target_map index out of range");
        }
        state.target_labels_[pos] = label;
        state.target_index_.emplace(label, pos);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("pipeline.json: ") + e.what());
  }
  state.fitted_ = true;
  return state;
}

}  // namespace tabkit::data

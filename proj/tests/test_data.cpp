#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "tabkit/pipeline.hpp"
#include "tabkit/rng.hpp"
#include "tabkit/table.hpp"

#include "support/oracles.hpp"

using namespace tabkit;
namespace cfg = tabkit::config;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

cfg::DataConfig basic_config(std::vector<std::string> cont = {},
                             std::vector<std::string> cat = {}) {
  cfg::DataConfig c;
  c.target = {"y"};
  c.continuous_cols = std::move(cont);
  c.categorical_cols = std::move(cat);
  return c;
}

}  // namespace

TEST_CASE("read_csv parses header, rows and nulls") {
  const auto path = write_temp("tabkit_basic.csv", "a,b\n1,x\n2,y\n3,z\n");
  data::TableFrame frame = data::read_csv(path);
  CHECK(frame.column_count() == 2);
  CHECK(frame.row_count() == 3);
  CHECK(frame.column("a").dtype == data::Dtype::kInteger);
  CHECK(frame.column("b").dtype == data::Dtype::kText);

  const auto with_null = write_temp("tabkit_null.csv", "a\n1.5\n\n2\n");
  data::TableFrame nulls = data::read_csv(with_null);
  CHECK(nulls.column("a").dtype == data::Dtype::kFloat);
  CHECK(nulls.column("a").nulls[1] == 1);
  CHECK(nulls.column("a").nulls[0] == 0);
}

TEST_CASE("read_csv error cases") {
  const auto ragged = write_temp("tabkit_ragged.csv", "a,b\n1,2\n1,2,3\n");
  CHECK_THROWS_AS(data::read_csv(ragged), RaggedRow);
  const auto empty = write_temp("tabkit_empty.csv", "");
  CHECK_THROWS_AS(data::read_csv(empty), EmptyFile);
  CHECK_THROWS_AS(data::read_csv("/no/such/file.csv"), FileNotFound);
}

TEST_CASE("read_csv honors RFC-4180 quoting") {
  const auto path = write_temp(
      "tabkit_quoted.csv",
      "name,v\n\"a,b\",1\n\"say \"\"hi\"\"\",2\n\"line\nbreak\",3\n");
  data::TableFrame frame = data::read_csv(path);
  CHECK(frame.row_count() == 3);
  CHECK(frame.column("name").texts[0] == "a,b");
  CHECK(frame.column("name").texts[1] == "say \"hi\"");
  CHECK(frame.column("name").texts[2] == "line\nbreak");
}

TEST_CASE("csv round trip through write_csv") {
  data::TableFrame frame;
  frame.add_text_column("name", {"plain", "with,comma", "with\"quote"});
  frame.add_numeric_column("v", {1.5, -2.0, 0.25});
  const auto path = std::filesystem::temp_directory_path() / "tabkit_rt.csv";
  frame.write_csv(path);
  data::TableFrame back = data::read_csv(path);
  CHECK(back.column("name").texts == frame.column("name").texts);
  CHECK(back.column("v").numbers == frame.column("v").numbers);
}

TEST_CASE("split_train_val sizes and determinism") {
  data::TableFrame frame;
  frame.add_numeric_column("y", std::vector<double>(10, 1.0));
  const auto [train, val] = data::split_train_val(frame, 0.2, 99);
  CHECK(val.size() == 2);
  CHECK(train.size() == 8);

  const auto [train2, val2] = data::split_train_val(frame, 0.2, 99);
  CHECK(train == train2);
  CHECK(val == val2);

  data::TableFrame small;
  small.add_numeric_column("y", std::vector<double>(5, 1.0));
  const auto [t5, v5] = data::split_train_val(small, 0.1, 1);
  CHECK(v5.size() == 1);  // clamped to at least one row

  data::TableFrame tiny;
  tiny.add_numeric_column("y", {1.0});
  CHECK_THROWS_AS(data::split_train_val(tiny, 0.5, 1), TooFewRows);
}

TEST_CASE("split indices always partition the rows") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 2 + rng.uniform_index(200);
    const double fraction = rng.uniform(0.01, 0.99);
    data::TableFrame frame;
    frame.add_numeric_column("y", std::vector<double>(rows, 0.0));
    const auto [train, val] = data::split_train_val(frame, fraction,
                                                    rng.next_u64());
    std::set<std::size_t> seen(train.begin(), train.end());
    seen.insert(val.begin(), val.end());
    CHECK(seen.size() == rows);
    CHECK(train.size() + val.size() == rows);
    CHECK(*seen.rbegin() == rows - 1);
    CHECK(val.size() >= 1);
    CHECK(train.size() >= 1);
  }
}

TEST_CASE("fit_pipeline builds vocabularies and statistics") {
  data::TableFrame frame;
  frame.add_text_column("color", {"red", "blue", "red"});
  frame.add_numeric_column("age", {1.0, 3.0, 2.0});
  frame.add_numeric_column("y", {1.0, 0.0, 1.0});

  auto state = data::fit_pipeline(frame, basic_config({"age"}, {"color"}),
                                  cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kClassification, 1);
  const auto& cs = state.cat_stats()[0];
  CHECK(cs.categories == std::vector<std::string>{"red", "blue"});
  CHECK(cs.index.at("red") == 0);   // vocabulary code 1
  CHECK(cs.index.at("blue") == 1);  // vocabulary code 2
  CHECK(state.cont_mean(0) == 2.0);
  CHECK(state.cont_std(0) ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(state.target_labels() == std::vector<std::string>{"1", "0"});

  data::TableFrame two;
  two.add_numeric_column("age", {1.0, 3.0});
  two.add_numeric_column("y", {0.0, 1.0});
  auto st2 = data::fit_pipeline(two, basic_config({"age"}),
                                cfg::ModelKind::kCategoryEmbedding,
                                cfg::Task::kRegression, 1);
  CHECK(st2.cont_mean(0) == 2.0);
  CHECK(st2.cont_std(0) == 1.0);  // population estimator
}

TEST_CASE("fit_pipeline error paths") {
  data::TableFrame frame;
  frame.add_numeric_column("age", {1.0, 2.0});
  frame.add_numeric_column("y", {0.0, 1.0});
  CHECK_THROWS_AS(
      data::fit_pipeline(frame, basic_config({"missing"}, {}),
                         cfg::ModelKind::kCategoryEmbedding,
                         cfg::Task::kRegression, 1),
      MissingColumn);

  data::TableFrame nully;
  nully.add_numeric_column("age", {1.0, 2.0});
  nully.add_numeric_column("y", {0.0, 1.0}, {0, 1});
  CHECK_THROWS_AS(
      data::fit_pipeline(nully, basic_config({"age"}, {}),
                         cfg::ModelKind::kCategoryEmbedding,
                         cfg::Task::kRegression, 1),
      NullTarget);

  data::TableFrame texty;
  texty.add_text_column("age", {"young", "old"});
  texty.add_numeric_column("y", {0.0, 1.0});
  CHECK_THROWS_AS(
      data::fit_pipeline(texty, basic_config({"age"}, {}),
                         cfg::ModelKind::kCategoryEmbedding,
                         cfg::Task::kRegression, 1),
      NonNumericContinuous);
}

TEST_CASE("transform applies identical fitted statistics") {
  data::TableFrame train;
  train.add_text_column("color", {"red", "blue", "red", "blue"});
  train.add_numeric_column("age", {1.0, 3.0, 1.0, 3.0});
  train.add_numeric_column("y", {0.0, 1.0, 0.0, 1.0});
  auto state = data::fit_pipeline(train, basic_config({"age"}, {"color"}),
                                  cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kClassification, 3);

  data::TableFrame test;
  test.add_text_column("color", {"green", "red"});
  test.add_numeric_column("age", {2.0, 5.0}, {0, 1});
  auto ds = data::transform(test, state, data::TransformMode::kInference);
  CHECK(ds.cat[0] == 0);  // unseen category -> reserved index
  CHECK(ds.cat[1] == 1);
  CHECK(ds.cont[0] == 0.0);  // value equal to the training mean
  CHECK(ds.cont[1] == 0.0);  // null imputed with the mean, then standardized

  data::PipelineState unfitted;
  CHECK_THROWS_AS(data::transform(test, unfitted,
                                  data::TransformMode::kInference),
                  NotFitted);
}

TEST_CASE("constant training column transforms to zero") {
  data::TableFrame train;
  train.add_numeric_column("c", {5.0, 5.0, 5.0});
  train.add_numeric_column("y", {1.0, 2.0, 3.0});
  auto state = data::fit_pipeline(train, basic_config({"c"}),
                                  cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kRegression, 1);
  data::TableFrame test;
  test.add_numeric_column("c", {42.0});
  test.add_numeric_column("y", {0.0});
  auto ds = data::transform(test, state, data::TransformMode::kInference);
  CHECK(ds.cont[0] == 0.0);
}

TEST_CASE("standardized training columns have mean 0 and std 1") {
  Rng rng(11);
  data::TableFrame train;
  std::vector<double> a(64), b(64), y(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = rng.uniform(-3, 9);
    b[i] = rng.normal() * 4 + 2;
    y[i] = rng.uniform(0, 1);
  }
  train.add_numeric_column("a", a);
  train.add_numeric_column("b", b);
  train.add_numeric_column("y", y);
  auto state = data::fit_pipeline(train, basic_config({"a", "b"}),
                                  cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kRegression, 1);
  auto ds = data::transform(train, state, data::TransformMode::kTrain);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 64; ++r) mean += ds.cont[r * 2 + c];
    mean /= 64;
    double var = 0.0;
    for (std::size_t r = 0; r < 64; ++r) {
      var += (ds.cont[r * 2 + c] - mean) * (ds.cont[r * 2 + c] - mean);
    }
    var /= 64;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
  }
}

TEST_CASE("minmax and none normalizations") {
  data::TableFrame train;
  train.add_numeric_column("a", {0.0, 10.0, 5.0});
  train.add_numeric_column("y", {1.0, 2.0, 3.0});
  cfg::DataConfig c = basic_config({"a"});
  c.normalization = cfg::Normalization::kMinMax;
  auto state = data::fit_pipeline(train, c, cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kRegression, 1);
  auto ds = data::transform(train, state, data::TransformMode::kTrain);
  CHECK(ds.cont[0] == 0.0);
  CHECK(ds.cont[1] == 1.0);
  CHECK(ds.cont[2] == 0.5);

  cfg::DataConfig none = basic_config({"a"});
  none.normalization = cfg::Normalization::kNone;
  auto raw_state = data::fit_pipeline(
      train, none, cfg::ModelKind::kCategoryEmbedding, cfg::Task::kRegression,
      1);
  auto raw = data::transform(train, raw_state, data::TransformMode::kTrain);
  CHECK(raw.cont[1] == 10.0);
}

TEST_CASE("leave-one-out encoding on a small hand-checked table") {
  data::TableFrame train;
  train.add_text_column("cat", {"A", "A", "A", "B"});
  train.add_numeric_column("y", {1.0, 0.0, 1.0, 1.0});
  auto state = data::fit_pipeline(train, basic_config({}, {"cat"}),
                                  cfg::ModelKind::kNodeLeaveOneOut,
                                  cfg::Task::kRegression, 1);
  auto ds = data::transform(train, state, data::TransformMode::kTrain);
  REQUIRE(ds.n_loo == 1);
  CHECK(ds.loo[0] == 0.5);
  CHECK(ds.loo[1] == 1.0);
  CHECK(ds.loo[2] == 0.5);
  CHECK(ds.loo[3] == 0.75);  // singleton B falls back to the global mean

  const std::vector<std::string> cats{"A"};
  const std::vector<double> no_target;
  const auto inference = state.encode_leave_one_out(
      0, cats, no_target, data::TransformMode::kInference);
  CHECK(inference[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const std::vector<std::string> unseen{"C"};
  const auto fallback = state.encode_leave_one_out(
      0, unseen, no_target, data::TransformMode::kInference);
  CHECK(fallback[0] == 0.75);
}

TEST_CASE("leave-one-out codes average back to the category mean") {
  Rng rng(17);
  const std::size_t rows = 500;
  std::vector<std::string> cats(rows);
  std::vector<double> y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    cats[i] = "c" + std::to_string(rng.uniform_index(12));
    y[i] = rng.uniform(-1, 1);
  }
  data::TableFrame train;
  train.add_text_column("cat", cats);
  train.add_numeric_column("y", y);
  auto state = data::fit_pipeline(train, basic_config({}, {"cat"}),
                                  cfg::ModelKind::kNodeLeaveOneOut,
                                  cfg::Task::kRegression, 1);
  auto ds = data::transform(train, state, data::TransformMode::kTrain);

  oracles::LooOracle oracle(cats, y);
  // Per-row agreement with the independent oracle, bit for bit.
  for (std::size_t i = 0; i < rows; ++i) {
    CHECK(ds.loo[i] == oracle.train_code(cats[i], y[i]));
  }
  // Mean of the training codes of category c equals sum_c/count_c.
  std::unordered_map<std::string, double> sums;
  std::unordered_map<std::string, long long> counts;
  for (std::size_t i = 0; i < rows; ++i) {
    sums[cats[i]] += ds.loo[i];
    counts[cats[i]] += 1;
  }
  for (const auto& [cat, count] : counts) {
    if (count < 2) continue;
    const double mean_code = sums[cat] / static_cast<double>(count);
    CHECK(mean_code == doctest::Approx(oracle.inference_code(cat))
                           .epsilon(1e-12));
  }
}

TEST_CASE("leave-one-out noise is off by default and deterministic when on") {
  data::TableFrame train;
  train.add_text_column("cat", {"A", "A", "B", "B"});
  train.add_numeric_column("y", {1.0, 0.0, 1.0, 0.0});

  cfg::DataConfig plain = basic_config({}, {"cat"});
  auto state = data::fit_pipeline(train, plain, cfg::ModelKind::kNodeLeaveOneOut,
                                  cfg::Task::kRegression, 9);
  auto a = data::transform(train, state, data::TransformMode::kTrain);
  auto b = data::transform(train, state, data::TransformMode::kTrain);
  CHECK(a.loo == b.loo);  // no jitter by default

  cfg::DataConfig noisy = basic_config({}, {"cat"});
  noisy.loo_noise_std = 0.1;
  auto noisy_state = data::fit_pipeline(
      train, noisy, cfg::ModelKind::kNodeLeaveOneOut, cfg::Task::kRegression,
      9);
  auto n1 = data::transform(train, noisy_state, data::TransformMode::kTrain);
  auto n2 = data::transform(train, noisy_state, data::TransformMode::kTrain);
  CHECK(n1.loo == n2.loo);  // same seed, same jitter
  CHECK(n1.loo != a.loo);
  // Inference mode never applies jitter.
  auto inf = data::transform(train, noisy_state,
                             data::TransformMode::kInference);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(inf.loo[i] == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("null categories become their own category") {
  data::TableFrame train;
  train.add_text_column("cat", {"A", "", "A"}, {0, 1, 0});
  train.add_numeric_column("y", {0.0, 1.0, 0.0});
  auto state = data::fit_pipeline(train, basic_config({}, {"cat"}),
                                  cfg::ModelKind::kCategoryEmbedding,
                                  cfg::Task::kRegression, 1);
  CHECK(state.cat_stats()[0].categories.size() == 2);
  auto ds = data::transform(train, state, data::TransformMode::kTrain);
  CHECK(ds.cat[1] == 2);  // sentinel category got its own code
}

TEST_CASE("batches cover the data and honor drop_degenerate") {
  auto plan = data::batches(10, 4, false, 0, 0, false);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 4);
  CHECK(plan[1].size() == 4);
  CHECK(plan[2].size() == 2);
  CHECK(plan[0][0] == 0);  // no shuffle keeps the original order

  auto dropped = data::batches(9, 4, false, 0, 0, true);
  REQUIRE(dropped.size() == 2);

  auto shuffled = data::batches(32, 8, true, 7, 3, false);
  auto again = data::batches(32, 8, true, 7, 3, false);
  CHECK(shuffled == again);
  auto other_epoch = data::batches(32, 8, true, 7, 4, false);
  CHECK(shuffled != other_epoch);

  std::set<std::size_t> seen;
  for (const auto& b : shuffled) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 32);
}

TEST_CASE("pipeline JSON serialization round-trips") {
  data::TableFrame train;
  train.add_text_column("color", {"red", "blue", "red", "", "blue"},
                        {0, 0, 0, 1, 0});
  train.add_numeric_column("age", {1, 2, 3, 4, 5});
  train.add_text_column("y", {"yes", "no", "yes", "no", "yes"});
  cfg::DataConfig c = basic_config({"age"}, {"color"});
  auto state = data::fit_pipeline(train, c, cfg::ModelKind::kNodeLeaveOneOut,
                                  cfg::Task::kClassification, 21);
  const std::string text = state.to_json();
  auto restored = data::PipelineState::from_json(
      text, c, cfg::ModelKind::kNodeLeaveOneOut, cfg::Task::kClassification);
  CHECK(restored.fitted());
  CHECK(restored.seed() == 21);
  CHECK(restored.target_labels() == state.target_labels());
  CHECK(restored.global_target_mean() == state.global_target_mean());

  auto a = data::transform(train, state, data::TransformMode::kInference);
  auto b = data::transform(train, restored, data::TransformMode::kInference);
  CHECK(a.cont == b.cont);
  CHECK(a.cat == b.cat);
  CHECK(a.loo == b.loo);
  CHECK(restored.to_json() == text);
}

#include "tabkit/tracking.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

#include <nlohmann/json.hpp>

namespace tabkit::tracking {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string utc_timestamp(const char* fmt) {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), fmt, &tm);
  return buf;
}

double wall_clock_seconds() {
  return std::chrono::duration<double>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RunHandle RunHandle::open_dir(std::filesystem::path dir, std::string run_id,
                              const config::ConfigBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string());

  {
    std::ofstream cfg(dir / "config.yaml");
    if (!cfg) throw IoError((dir / "config.yaml").string());
    cfg << config::to_yaml(bundle);
  }
  {
    ordered_json meta;
    meta["run_id"] = run_id;
    meta["project_name"] = bundle.experiment().project_name;
    meta["seed"] = bundle.trainer().seed;
    meta["start_time"] = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
    std::ofstream out(dir / "meta.json");
    if (!out) throw IoError((dir / "meta.json").string());
    out << meta.dump(2) << "\n";
  }

  RunHandle handle;
  handle.sink_.open(dir / "metrics.jsonl", std::ios::app);
  if (!handle.sink_) throw IoError((dir / "metrics.jsonl").string());
  handle.dir_ = std::move(dir);
  handle.run_id_ = std::move(run_id);
  return handle;
}

RunHandle RunHandle::start_run(const config::ExperimentConfig& experiment,
                               const config::ConfigBundle& bundle) {
  const std::string run_name =
      experiment.run_name.value_or(utc_timestamp("%Y%m%d-%H%M%S"));
  std::filesystem::path dir =
      std::filesystem::path(experiment.log_dir) / experiment.project_name /
      run_name;
  // Never clobber an existing run of the same name.
  if (std::filesystem::exists(dir)) {
    int suffix = 1;
    std::filesystem::path candidate;
    do {
      candidate = dir;
      candidate += "-" + std::to_string(suffix++);
    } while (std::filesystem::exists(candidate));
    dir = candidate;
  }
  const std::string run_id =
      experiment.project_name + "/" + dir.filename().string();
  return open_dir(std::move(dir), run_id, bundle);
}

RunHandle RunHandle::open_at(const std::filesystem::path& dir,
                             const config::ConfigBundle& bundle) {
  const std::string run_id = bundle.experiment().project_name + "/" +
                             dir.filename().string();
  return open_dir(dir, run_id, bundle);
}

void RunHandle::log_metric(MetricsRecord record) {
  if (!std::isfinite(record.value)) {
    throw InvalidValue("metric " + record.name, "non-finite value");
  }
  if (record.run_id.empty()) record.run_id = run_id_;
  record.wall_time = wall_clock_seconds();
  ordered_json line;
  line["run_id"] = record.run_id;
  line["epoch"] = record.epoch;
  line["step"] = record.step;
  line["split"] = record.split;
  line["name"] = record.name;
  line["value"] = record.value;
  line["wall_time"] = record.wall_time;
  sink_ << line.dump() << "\n";
  if (!sink_) throw IoError((dir_ / "metrics.jsonl").string());
}

void RunHandle::log_gradient_norms(const ad::ParamStore& params,
                                   std::size_t epoch, std::size_t step) {
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    double sq = 0.0;
    if (e.tensor.has_grad()) {
      for (double g : e.tensor.grad()) sq += g * g;
    }
    MetricsRecord record;
    record.epoch = epoch;
    record.step = step;
    record.split = "train";
    record.name = "grad_norm/" + e.name;
    record.value = std::sqrt(sq);
    log_metric(std::move(record));
  }
}

void RunHandle::flush() { sink_.flush(); }

}  // namespace tabkit::tracking

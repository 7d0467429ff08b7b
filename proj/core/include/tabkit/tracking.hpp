#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "tabkit/config.hpp"
#include "tabkit/param_store.hpp"

namespace tabkit::tracking {

struct MetricsRecord {
  std::string run_id;
  std::size_t epoch = 0;
  std::size_t step = 0;
  std::string split;  // train | val | test
  std::string name;
  double value = 0.0;
  double wall_time = 0.0;  // seconds since the epoch; the sink fills it
};

// One run directory with an append-only metrics.jsonl sink plus config and
// metadata snapshots.
class RunHandle {
 public:
  // Creates log_dir/project_name/<run_name or UTC timestamp>/.
  static RunHandle start_run(const config::ExperimentConfig& experiment,
                             const config::ConfigBundle& bundle);
  // Opens an explicit directory as the run root (used by the CLI).
  static RunHandle open_at(const std::filesystem::path& dir,
                           const config::ConfigBundle& bundle);

  RunHandle(RunHandle&&) = default;
  RunHandle& operator=(RunHandle&&) = default;

  // Appends one JSON object per line; rejects non-finite values.
  void log_metric(MetricsRecord record);

  // One record per trainable parameter: name "grad_norm/<param>", value its
  // gradient's L2 norm.
  void log_gradient_norms(const ad::ParamStore& params, std::size_t epoch,
                          std::size_t step);

  void flush();

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& run_id() const { return run_id_; }

 private:
  RunHandle() = default;
  static RunHandle open_dir(std::filesystem::path dir, std::string run_id,
                            const config::ConfigBundle& bundle);

  std::filesystem::path dir_;
  std::string run_id_;
  std::ofstream sink_;
};

}  // namespace tabkit::tracking

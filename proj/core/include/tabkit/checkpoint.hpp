#pragma once

#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "tabkit/config.hpp"
#include "tabkit/param_store.hpp"
#include "tabkit/pipeline.hpp"

namespace tabkit::api {

inline constexpr int kCheckpointFormatVersion = 1;

// Directory layout: config.yaml (full bundle), pipeline.json (fitted
// pipeline), manifest.json (ordered tensor descriptors + format_version),
// weights.bin (raw little-endian float64 in manifest order, including
// batch-norm running stats). Files are written via temp + rename.
void write_checkpoint(const std::filesystem::path& dir,
                      const config::ConfigBundle& bundle,
                      const data::PipelineState& pipeline,
                      const ad::ParamStore& params);

struct LoadedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct LoadedCheckpoint {
  config::ConfigBundle bundle;
  data::PipelineState pipeline;
  std::vector<LoadedTensor> tensors;
};

LoadedCheckpoint read_checkpoint(const std::filesystem::path& dir);

// Copies loaded values into an already-constructed store; names, shapes
// and entry counts must match exactly.
void restore_into(ad::ParamStore& params, const LoadedCheckpoint& loaded);

}  // namespace tabkit::api

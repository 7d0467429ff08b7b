#include "tabkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tabkit::api {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError(tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string());
}

void append_le_double(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

double read_le_double(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b]))
            << (8 * b);
  }
  return std::bit_cast<double>(bits);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadCheckpoint("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_checkpoint(const std::filesystem::path& dir,
                      const config::ConfigBundle& bundle,
                      const data::PipelineState& pipeline,
                      const ad::ParamStore& params) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string());

  ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  ordered_json tensors = ordered_json::array();
  std::string weights;
  weights.reserve(params.total_value_count() * 8);
  std::uint64_t offset = 0;
  for (const auto& e : params.entries()) {
    ordered_json desc;
    desc["name"] = e.name;
    desc["shape"] = e.tensor.shape();
    desc["offset"] = offset;
    desc["count"] = e.tensor.size();
    tensors.push_back(std::move(desc));
    for (double v : e.tensor.data()) append_le_double(weights, v);
    offset += e.tensor.size() * 8;
  }
  manifest["tensors"] = std::move(tensors);

  write_file_atomic(dir / "config.yaml", config::to_yaml(bundle));
  write_file_atomic(dir / "pipeline.json", pipeline.to_json());
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file_atomic(dir / "weights.bin", weights);
}

LoadedCheckpoint read_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw NoCheckpoint(dir.string());
  }

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("manifest.json: ") + e.what());
  }
  if (!manifest.contains("format_version")) {
    throw BadCheckpoint("manifest.json lacks format_version");
  }
  const int version = manifest["format_version"].get<int>();
  if (version != kCheckpointFormatVersion) throw VersionMismatch(version);

  YAML::Node raw;
  try {
    raw = config::load_config_file(dir / "config.yaml");
  } catch (const FileNotFound&) {
    throw BadCheckpoint("missing config.yaml");
  }
  LoadedCheckpoint loaded{config::validate(raw), {}, {}};

  loaded.pipeline = data::PipelineState::from_json(
      read_file(dir / "pipeline.json"), loaded.bundle.data(),
      config::resolve_model(loaded.bundle.model()),
      loaded.bundle.model().task);

  const std::string weights = read_file(dir / "weights.bin");
  std::uint64_t expected_offset = 0;
  try {
    for (const auto& desc : manifest.at("tensors")) {
      LoadedTensor t;
      t.name = desc.at("name").get<std::string>();
      t.shape = desc.at("shape").get<ad::Shape>();
      const auto offset = desc.at("offset").get<std::uint64_t>();
      const auto count = desc.at("count").get<std::uint64_t>();
      if (offset != expected_offset) {
        throw BadCheckpoint("byte range of " + t.name +
                            " does not tile weights.bin");
      }
      if (count != ad::shape_size(t.shape)) {
        throw BadCheckpoint("count of " + t.name +
                            " does not match its shape");
      }
      if (offset + count * 8 > weights.size()) {
        throw BadCheckpoint("byte range of " + t.name +
                            " exceeds weights.bin");
      }
      t.values.resize(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        t.values[i] = read_le_double(weights.data() + offset + i * 8);
      }
      expected_offset = offset + count * 8;
      loaded.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw BadCheckpoint(std::string("manifest.json: ") + e.what());
  }
  if (expected_offset != weights.size()) {
    throw BadCheckpoint("weights.bin has trailing bytes beyond the manifest");
  }
  return loaded;
}

void restore_into(ad::ParamStore& params, const LoadedCheckpoint& loaded) {
  if (loaded.tensors.size() != params.entries().size()) {
    throw BadCheckpoint("tensor count does not match the model");
  }
  for (const auto& t : loaded.tensors) {
    ad::Tensor* target = params.find(t.name);
    if (target == nullptr) throw BadCheckpoint("unexpected tensor " + t.name);
    if (target->shape() != t.shape) {
      throw BadCheckpoint("shape mismatch for " + t.name);
    }
    target->data() = t.values;
  }
}

}  // namespace tabkit::api

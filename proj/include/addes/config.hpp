#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "addes/bench.hpp"
#include "json.hpp"

namespace addes {

using Json = nlohmann::json;

/// One document determining every artifact of a run.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  PlantedConfig data;
  ModelConfig model;
  GenConfig gen;
  TrainConfig train;
  DownstreamConfig downstream;
  std::vector<std::size_t> ds_grid{500, 1000, 2000, 4000};
  double entropy_lambda = 0.1;
  std::vector<SweepSpec> sweeps;

  void validate() const;
  PipelineConfig pipeline() const;
};

Json to_json(const PlantedConfig& c);
Json to_json(const ClassifierConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const GenConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const DownstreamConfig& c);
Json to_json(const SweepSpec& s);
Json to_json(const RunConfig& c);

/// Parsers start from defaults and overwrite present keys; unknown keys are a
/// ConfigError naming the path.
PlantedConfig planted_config_from(const Json& j);
ClassifierConfig classifier_config_from(const Json& j);
ModelConfig model_config_from(const Json& j);
GenConfig gen_config_from(const Json& j);
TrainConfig train_config_from(const Json& j);
DownstreamConfig downstream_config_from(const Json& j);
SweepSpec sweep_spec_from(const Json& j);
RunConfig run_config_from(const Json& j);

/// Set `dotted.path` to `value`, parsed as JSON when possible, else a string.
void apply_override(Json& doc, const std::string& dotted_path, const std::string& value);

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

/// Hex FNV-1a over the canonical dump.
std::string config_hash(const RunConfig& c);

}  // namespace addes

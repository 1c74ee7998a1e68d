#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "cfsim/harness.hpp"

namespace cfsim {

/// Where the experiment population comes from: the synthetic generator
/// (default) or a dataset file in the documented CSV schema.
struct PopulationSource {
  enum class Kind { kGenerate, kFile };
  Kind kind = Kind::kGenerate;
  GeneratorSpec generator;
  std::string path;           // dataset CSV for kFile
  std::string template_path;  // optional registry template, empty = builtin
};

/// One full CLI run: experiment configuration plus population source.
struct RunSpec {
  ExperimentConfig experiment;
  PopulationSource population;
  std::string matrix_format = "csv";  // csv | binary
};

/// Parse and validate a run config. Field errors name the offending field;
/// JSON syntax errors carry the parser's position diagnostics.
RunSpec parse_run_spec(const nlohmann::json& j);
RunSpec load_run_spec(const std::string& path);

/// Resolved snapshot of a run spec (all defaults made explicit); embedding
/// this in the manifest is what makes reruns reproducible.
nlohmann::json run_spec_to_json(const RunSpec& spec);

}  // namespace cfsim

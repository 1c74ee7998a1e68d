#include "cfsim/config.hpp"

#include <fstream>

#include "cfsim/errors.hpp"

namespace cfsim {

namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& j, const std::string& field, const T& fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
}

template <typename T>
T require_field(const json& j, const std::string& field) {
  if (!j.contains(field)) throw ConfigError("missing required field '" + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
}

}  // namespace

RunSpec parse_run_spec(const json& j) {
  const int version = get_field<int>(j, "schema_version", 1);
  if (version != 1) {
    throw ConfigError("unsupported schema_version " + std::to_string(version));
  }

  RunSpec spec;
  ExperimentConfig& exp = spec.experiment;
  exp.experiment_id = require_field<std::string>(j, "experiment");
  exp.subject_count = require_field<int>(j, "subjects");
  exp.seed = get_field<std::uint64_t>(j, "seed", 0);
  exp.photos_per_subject_per_pose = get_field<int>(j, "photos_per_subject_per_pose", 5);
  exp.noise_px = get_field<double>(j, "noise_px", 0.0);

  const std::string default_set = exp.experiment_id == "E4" ? "set_B" : "set_A";
  exp.landmark_set = landmark_set_from_string(get_field<std::string>(j, "landmark_set", default_set));

  if (j.contains("fstt")) {
    const json& f = j.at("fstt");
    exp.fstt.thickness_mode =
        thickness_mode_from_string(require_field<std::string>(f, "thickness"));
    exp.fstt.direction_mode =
        direction_mode_from_string(get_field<std::string>(f, "direction", "real"));
  } else if (exp.experiment_id == "E2") {
    exp.fstt.thickness_mode = ThicknessMode::kNone;
  } else if (exp.experiment_id == "E3" || exp.experiment_id == "E4") {
    exp.fstt.thickness_mode = ThicknessMode::kMean;
  }

  if (j.contains("visibility")) {
    const json& v = j.at("visibility");
    const std::string mode = get_field<std::string>(v, "mode", "geometric");
    if (mode == "geometric") {
      exp.visibility.mode = VisibilityModel::Mode::kGeometric;
    } else if (mode == "fixed_count") {
      exp.visibility.mode = VisibilityModel::Mode::kFixedCount;
      exp.visibility.fixed_count = require_field<int>(v, "k");
    } else {
      throw ConfigError("field 'visibility.mode': expected geometric or fixed_count");
    }
    exp.visibility.half_angle_deg =
        get_field<double>(v, "half_angle_deg", exp.visibility.half_angle_deg);
  } else if (exp.experiment_id == "E4") {
    throw ConfigError("E4 requires a visibility block with mode fixed_count");
  }

  if (j.contains("photo")) {
    const json& p = j.at("photo");
    PhotoRanges& r = exp.photo_ranges;
    r.focal_min = get_field<double>(p, "focal_min", r.focal_min);
    r.focal_max = get_field<double>(p, "focal_max", r.focal_max);
    r.rotation_max_deg = get_field<double>(p, "rotation_max_deg", r.rotation_max_deg);
    r.width_min = get_field<int>(p, "width_min", r.width_min);
    r.width_max = get_field<int>(p, "width_max", r.width_max);
    r.height_min = get_field<int>(p, "height_min", r.height_min);
    r.height_max = get_field<int>(p, "height_max", r.height_max);
    if (r.focal_min <= 0.0 || r.focal_max < r.focal_min) {
      throw ConfigError("field 'photo': focal range is invalid");
    }
    if (r.width_min <= 0 || r.width_max < r.width_min || r.height_min <= 0 ||
        r.height_max < r.height_min) {
      throw ConfigError("field 'photo': resolution range is invalid");
    }
  }

  const std::string metric = get_field<std::string>(j, "metric", "rmse");
  if (metric == "rmse") {
    exp.metric = ScoreMetric::kRmse;
  } else if (metric == "mae") {
    exp.metric = ScoreMetric::kMae;
  } else {
    throw ConfigError("field 'metric': expected rmse or mae");
  }

  exp.workers = get_field<int>(j, "workers", 0);

  if (j.contains("population")) {
    const json& p = j.at("population");
    const std::string source = get_field<std::string>(p, "source", "generate");
    if (source == "generate") {
      spec.population.kind = PopulationSource::Kind::kGenerate;
    } else if (source == "file") {
      spec.population.kind = PopulationSource::Kind::kFile;
      spec.population.path = require_field<std::string>(p, "path");
    } else {
      throw ConfigError("field 'population.source': expected generate or file");
    }
    spec.population.template_path = get_field<std::string>(p, "template", "");
    if (p.contains("generator")) {
      const json& g = p.at("generator");
      GeneratorSpec& gen = spec.population.generator;
      gen.shape_modes = get_field<int>(g, "shape_modes", gen.shape_modes);
      gen.shape_scale_mm = get_field<double>(g, "shape_scale_mm", gen.shape_scale_mm);
      gen.shape_decay = get_field<double>(g, "shape_decay", gen.shape_decay);
      gen.jitter_mm = get_field<double>(g, "jitter_mm", gen.jitter_mm);
      gen.direction_jitter_deg =
          get_field<double>(g, "direction_jitter_deg", gen.direction_jitter_deg);
      gen.thickness_min_mm = get_field<double>(g, "thickness_min_mm", gen.thickness_min_mm);
      gen.thickness_max_mm = get_field<double>(g, "thickness_max_mm", gen.thickness_max_mm);
    }
  }
  spec.population.generator.subject_count = exp.subject_count;
  spec.population.generator.landmark_set = exp.landmark_set;

  spec.matrix_format = get_field<std::string>(j, "matrix_format", "csv");
  if (spec.matrix_format != "csv" && spec.matrix_format != "binary") {
    throw ConfigError("field 'matrix_format': expected csv or binary");
  }

  exp.validate();
  return spec;
}

RunSpec load_run_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  try {
    return parse_run_spec(j);
  } catch (const ConfigError& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

nlohmann::json run_spec_to_json(const RunSpec& spec) {
  const ExperimentConfig& exp = spec.experiment;
  json j;
  j["schema_version"] = 1;
  j["experiment"] = exp.experiment_id;
  j["landmark_set"] = to_string(exp.landmark_set);
  j["subjects"] = exp.subject_count;
  j["photos_per_subject_per_pose"] = exp.photos_per_subject_per_pose;
  j["noise_px"] = exp.noise_px;
  j["seed"] = exp.seed;
  j["fstt"] = {{"thickness", to_string(exp.fstt.thickness_mode)},
               {"direction", to_string(exp.fstt.direction_mode)}};
  if (exp.visibility.mode == VisibilityModel::Mode::kFixedCount) {
    j["visibility"] = {{"mode", "fixed_count"},
                       {"k", exp.visibility.fixed_count},
                       {"half_angle_deg", exp.visibility.half_angle_deg}};
  } else {
    j["visibility"] = {{"mode", "geometric"}, {"half_angle_deg", exp.visibility.half_angle_deg}};
  }
  j["photo"] = {{"focal_min", exp.photo_ranges.focal_min},
                {"focal_max", exp.photo_ranges.focal_max},
                {"rotation_max_deg", exp.photo_ranges.rotation_max_deg},
                {"width_min", exp.photo_ranges.width_min},
                {"width_max", exp.photo_ranges.width_max},
                {"height_min", exp.photo_ranges.height_min},
                {"height_max", exp.photo_ranges.height_max}};
  j["metric"] = exp.metric == ScoreMetric::kRmse ? "rmse" : "mae";
  j["matrix_format"] = spec.matrix_format;
  json pop;
  pop["source"] = spec.population.kind == PopulationSource::Kind::kGenerate ? "generate" : "file";
  if (spec.population.kind == PopulationSource::Kind::kFile) pop["path"] = spec.population.path;
  if (!spec.population.template_path.empty()) pop["template"] = spec.population.template_path;
  const GeneratorSpec& gen = spec.population.generator;
  pop["generator"] = {{"shape_modes", gen.shape_modes},
                      {"shape_scale_mm", gen.shape_scale_mm},
                      {"shape_decay", gen.shape_decay},
                      {"jitter_mm", gen.jitter_mm},
                      {"direction_jitter_deg", gen.direction_jitter_deg},
                      {"thickness_min_mm", gen.thickness_min_mm},
                      {"thickness_max_mm", gen.thickness_max_mm}};
  j["population"] = std::move(pop);
  return j;
}

}  // namespace cfsim

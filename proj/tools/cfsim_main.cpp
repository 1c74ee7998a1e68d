// cfsim: synthetic craniofacial-superimposition identification experiments.
//
// Subcommands: generate (population), simulate (photo sets), run (N x N
// identification experiment), report (tables / CMC / SVG charts).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cfsim/config.hpp"
#include "cfsim/errors.hpp"
#include "cfsim/manifest.hpp"
#include "cfsim/reporting.hpp"

namespace fs = std::filesystem;

namespace {

/// Outputs are written under a quarantine suffix and renamed into place only
/// after the whole command succeeds, so failures never clobber previous
/// results.
class StagedOutputs {
public:
  std::string stage(const std::string& final_path) {
    staged_.push_back(final_path);
    return final_path + ".partial";
  }

  void commit() {
    for (const auto& path : staged_) {
      fs::rename(path + ".partial", path);
    }
    staged_.clear();
  }

private:
  std::vector<std::string> staged_;
};

std::shared_ptr<const cfsim::LandmarkRegistry> make_registry(const std::string& template_path) {
  if (template_path.empty()) {
    return {&cfsim::LandmarkRegistry::builtin(), [](const cfsim::LandmarkRegistry*) {}};
  }
  return std::make_shared<cfsim::LandmarkRegistry>(
      cfsim::LandmarkRegistry::load_file(template_path));
}

int cmd_generate(int subjects, const std::string& set_name, std::uint64_t seed,
                 const std::string& out_path, const std::string& template_path) {
  cfsim::GeneratorSpec spec;
  spec.subject_count = subjects;
  spec.landmark_set = cfsim::landmark_set_from_string(set_name);
  const auto registry = make_registry(template_path);
  const cfsim::Population pop = cfsim::generate_population(spec, seed, registry);

  StagedOutputs staged;
  cfsim::PopulationMeta meta;
  meta.provenance = "generated";
  meta.seed = seed;
  const std::string partial = staged.stage(out_path);
  cfsim::save_population(pop, partial, meta);
  // save_population writes a sidecar next to the CSV; stage it too.
  fs::rename(partial + ".meta.json", staged.stage(out_path + ".meta.json"));
  staged.commit();
  std::cout << "wrote " << pop.subjects.size() << " subjects to " << out_path << "\n";
  return 0;
}

int cmd_simulate(const std::string& population_path, const std::string& set_name,
                 int photos_per_pose, double noise, std::uint64_t seed,
                 const std::string& out_path, const std::string& template_path, int fixed_count,
                 double half_angle, const std::string& source) {
  const auto registry = make_registry(template_path);
  cfsim::Population pop = cfsim::load_population(population_path, registry);

  cfsim::ExperimentConfig config;
  config.experiment_id = source == "bone" ? "E2" : "E1";
  config.landmark_set = cfsim::landmark_set_from_string(set_name);
  config.subject_count = static_cast<int>(pop.subjects.size());
  config.photos_per_subject_per_pose = photos_per_pose;
  config.noise_px = noise;
  config.seed = seed;
  config.fstt.thickness_mode =
      source == "bone" ? cfsim::ThicknessMode::kNone : cfsim::ThicknessMode::kReal;
  if (fixed_count > 0) {
    config.visibility.mode = cfsim::VisibilityModel::Mode::kFixedCount;
    config.visibility.fixed_count = fixed_count;
  }
  if (half_angle > 0) config.visibility.half_angle_deg = half_angle;

  cfsim::FilterCriteria criteria;
  criteria.required = registry->set_ids(config.landmark_set);
  auto [filtered, rejections] = cfsim::filter_subjects(pop, criteria);
  auto [aligned, transforms] = cfsim::pca_align(filtered);
  const auto gallery = cfsim::build_gallery(config, aligned);

  StagedOutputs staged;
  const std::string partial = staged.stage(out_path);
  cfsim::save_photos(gallery, *registry, partial);
  fs::rename(partial + ".meta.json", staged.stage(out_path + ".meta.json"));
  staged.commit();
  std::cout << "wrote " << gallery.size() << " photos to " << out_path << " ("
            << rejections.items.size() << " subjects filtered)\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& manifest_path,
            const std::string& out_dir, int workers, std::optional<std::uint64_t> seed_override,
            const std::string& matrix_format_override) {
  cfsim::RunSpec spec;
  if (!manifest_path.empty()) {
    const cfsim::RunManifest previous = cfsim::load_manifest(manifest_path);
    spec = cfsim::parse_run_spec(previous.config);
  } else {
    spec = cfsim::load_run_spec(config_path);
  }
  if (seed_override.has_value()) spec.experiment.seed = *seed_override;
  if (!matrix_format_override.empty()) spec.matrix_format = matrix_format_override;
  spec.experiment.workers = workers;

  fs::create_directories(out_dir);

  cfsim::RunManifest manifest;
  manifest.config = cfsim::run_spec_to_json(spec);
  manifest.seed = spec.experiment.seed;

  const auto registry = make_registry(spec.population.template_path);
  if (!spec.population.template_path.empty()) {
    manifest.input_digests["template"] =
        cfsim::digest_hex(cfsim::fnv1a64_file(spec.population.template_path));
  } else {
    manifest.input_digests["template"] =
        cfsim::digest_hex(cfsim::fnv1a64(cfsim::builtin_template_text()));
  }

  cfsim::Population pop;
  if (spec.population.kind == cfsim::PopulationSource::Kind::kFile) {
    pop = cfsim::load_population(spec.population.path, registry);
    manifest.input_digests["population"] =
        cfsim::digest_hex(cfsim::fnv1a64_file(spec.population.path));
  } else {
    pop = cfsim::generate_population(spec.population.generator, spec.experiment.seed, registry);
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto [matrix, report] = cfsim::run_experiment(spec.experiment, pop);
  manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  StagedOutputs staged;
  const std::string matrix_name = spec.matrix_format == "binary" ? "matrix.bin" : "matrix.csv";
  const std::string matrix_path = (fs::path(out_dir) / matrix_name).string();
  const std::string matrix_partial = staged.stage(matrix_path);
  if (spec.matrix_format == "binary") {
    cfsim::save_matrix_binary(matrix, matrix_partial);
  } else {
    cfsim::save_matrix_csv(matrix, matrix_partial);
    fs::rename(matrix_partial + ".meta.json", staged.stage(matrix_path + ".meta.json"));
  }

  const std::string report_path = (fs::path(out_dir) / "report.json").string();
  cfsim::save_report_json(report, staged.stage(report_path));

  const std::string table_path = (fs::path(out_dir) / "report.txt").string();
  {
    std::ofstream table(staged.stage(table_path));
    table << cfsim::report_table({report});
  }

  const std::string cmc_path = (fs::path(out_dir) / "cmc.csv").string();
  cfsim::save_cmc_csv({report}, staged.stage(cmc_path));

  manifest.output_digests["matrix"] = cfsim::digest_hex(cfsim::fnv1a64_file(matrix_path + ".partial"));
  manifest.output_digests["report"] = cfsim::digest_hex(cfsim::fnv1a64_file(report_path + ".partial"));
  manifest.output_digests["cmc"] = cfsim::digest_hex(cfsim::fnv1a64_file(cmc_path + ".partial"));

  const std::string manifest_out = (fs::path(out_dir) / "manifest.json").string();
  cfsim::save_manifest(manifest, staged.stage(manifest_out));

  staged.commit();
  std::cout << cfsim::report_table({report});
  std::printf("solved %lld overlays in %.1f s (%d failures)\n", report.total_sfo,
              manifest.wall_seconds, report.solver_failures);
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& table_path,
               const std::string& svg_path, const std::string& cmc_path) {
  std::vector<cfsim::ExperimentReport> reports;
  reports.reserve(inputs.size());
  for (const auto& path : inputs) reports.push_back(cfsim::load_report_json(path));

  StagedOutputs staged;
  if (!table_path.empty()) {
    std::ofstream out(staged.stage(table_path));
    if (!out) throw cfsim::IoError("cannot write table '" + table_path + "'");
    out << cfsim::report_table(reports);
  } else {
    std::cout << cfsim::report_table(reports);
  }
  if (!svg_path.empty()) {
    std::ofstream out(staged.stage(svg_path));
    if (!out) throw cfsim::IoError("cannot write chart '" + svg_path + "'");
    out << cfsim::svg_accuracy_chart(reports);
  }
  if (!cmc_path.empty()) {
    cfsim::save_cmc_csv(reports, staged.stage(cmc_path));
  }
  staged.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"craniofacial superimposition identification experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int workers = 0;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", seed, "global random seed");
  app.add_option("--workers", workers, "worker threads (0 = hardware)");
  app.add_option("--out-dir", out_dir, "output directory");

  auto* generate = app.add_subcommand("generate", "generate a synthetic population");
  int gen_subjects = 0;
  std::string gen_set = "set_A", gen_out = "population.csv", gen_template;
  generate->add_option("--subjects", gen_subjects, "number of subjects")->required();
  generate->add_option("--landmark-set", gen_set, "set_A or set_B");
  generate->add_option("--out", gen_out, "output CSV path");
  generate->add_option("--template", gen_template, "custom landmark template file");

  auto* simulate = app.add_subcommand("simulate", "render a synthetic photo gallery");
  std::string sim_pop, sim_set = "set_A", sim_out = "photos.csv", sim_template, sim_source = "skin";
  int sim_photos = 5, sim_fixed = 0;
  double sim_noise = 0.0, sim_half_angle = 0.0;
  simulate->add_option("--population", sim_pop, "population CSV")->required();
  simulate->add_option("--landmark-set", sim_set, "set_A or set_B");
  simulate->add_option("--photos-per-pose", sim_photos, "photos per subject and pose");
  simulate->add_option("--noise", sim_noise, "landmark localization noise (px)");
  simulate->add_option("--out", sim_out, "output CSV path");
  simulate->add_option("--template", sim_template, "custom landmark template file");
  simulate->add_option("--fixed-count", sim_fixed, "fixed visible-landmark count");
  simulate->add_option("--half-angle", sim_half_angle, "geometric visibility half angle (deg)");
  simulate->add_option("--from", sim_source, "render from 'skin' or 'bone' landmarks");

  auto* run = app.add_subcommand("run", "run an identification experiment");
  std::string run_config, run_manifest, run_matrix_format;
  run->add_option("--config", run_config, "experiment config JSON");
  run->add_option("--from-manifest", run_manifest, "rerun from a manifest");
  run->add_option("--matrix-format", run_matrix_format, "csv or binary");

  auto* report = app.add_subcommand("report", "combine run reports into tables and charts");
  std::vector<std::string> rep_inputs;
  std::string rep_table, rep_svg, rep_cmc;
  report->add_option("--input", rep_inputs, "report.json files")->required()->expected(-1);
  report->add_option("--table", rep_table, "text table output path");
  report->add_option("--svg", rep_svg, "SVG chart output path");
  report->add_option("--cmc", rep_cmc, "CMC CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const std::string out = (fs::path(out_dir) / gen_out).string();
      fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path().string());
      return cmd_generate(gen_subjects, gen_set, seed, out, gen_template);
    }
    if (simulate->parsed()) {
      const std::string out = (fs::path(out_dir) / sim_out).string();
      return cmd_simulate(sim_pop, sim_set, sim_photos, sim_noise, seed, out, sim_template,
                          sim_fixed, sim_half_angle, sim_source);
    }
    if (run->parsed()) {
      if (run_config.empty() == run_manifest.empty()) {
        std::cerr << "error: provide exactly one of --config or --from-manifest\n";
        return 2;
      }
      std::optional<std::uint64_t> seed_override;
      if (seed_opt->count() > 0) seed_override = seed;
      return cmd_run(run_config, run_manifest, out_dir, workers, seed_override,
                     run_matrix_format);
    }
    if (report->parsed()) {
      return cmd_report(rep_inputs, rep_table, rep_svg, rep_cmc);
    }
  } catch (const cfsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

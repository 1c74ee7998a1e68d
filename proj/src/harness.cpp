#include "cfsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "cfsim/errors.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_e4_k(int k) { return k == 8 || k == 10 || k == 12 || k == 14 || k == 16; }

}  // namespace

void ExperimentConfig::validate() const {
  if (experiment_id != "E1" && experiment_id != "E2" && experiment_id != "E3" &&
      experiment_id != "E4") {
    throw ConfigError("experiment_id must be one of E1..E4, got '" + experiment_id + "'");
  }
  if (subject_count <= 0) throw ConfigError("subject_count must be positive");
  if (photos_per_subject_per_pose <= 0) {
    throw ConfigError("photos_per_subject_per_pose must be positive");
  }
  if (noise_px != 0.0 && noise_px != 5.0) {
    throw ConfigError("noise_px must be 0 or 5");
  }

  if (experiment_id == "E1") {
    if (fstt.thickness_mode != ThicknessMode::kReal || fstt.direction_mode != DirectionMode::kReal) {
      throw ConfigError("E1 requires fstt (real, real)");
    }
  } else if (experiment_id == "E2") {
    if (fstt.thickness_mode != ThicknessMode::kNone) {
      throw ConfigError("E2 requires fstt thickness mode none (skull photographs)");
    }
  } else {
    if (fstt.thickness_mode != ThicknessMode::kMean) {
      throw ConfigError(experiment_id + " requires fstt thickness mode mean");
    }
  }

  if (experiment_id == "E4") {
    if (landmark_set != LandmarkSet::kSetB) throw ConfigError("E4 uses landmark set_B");
    if (visibility.mode != VisibilityModel::Mode::kFixedCount || !is_e4_k(visibility.fixed_count)) {
      throw ConfigError("E4 requires fixed-count visibility with k in {8,10,12,14,16}, got k=" +
                        std::to_string(visibility.fixed_count));
    }
  } else {
    if (landmark_set != LandmarkSet::kSetA) {
      throw ConfigError(experiment_id + " uses landmark set_A");
    }
    if (visibility.mode == VisibilityModel::Mode::kFixedCount &&
        (visibility.fixed_count < 8 || visibility.fixed_count > 16)) {
      throw ConfigError("fixed-count visibility requires k in [8, 16]");
    }
  }
  if (visibility.half_angle_deg <= 0.0 || visibility.half_angle_deg >= 180.0) {
    throw ConfigError("visibility half angle must lie in (0, 180) degrees");
  }
}

std::vector<RankingResult> rank_queries(const ComparisonMatrix& matrix) {
  std::vector<RankingResult> rankings;
  rankings.reserve(matrix.cols());
  const std::size_t n = matrix.rows();

  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    RankingResult r;
    r.photo_id = matrix.photo_ids[j];
    r.order.resize(n);
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
      const double sa = matrix.at(static_cast<std::size_t>(a), j);
      const double sb = matrix.at(static_cast<std::size_t>(b), j);
      if (sa != sb) return sa < sb;
      return a < b;  // ties: ascending candidate subject id
    });
    r.rank_of_truth = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (matrix.skull_ids[static_cast<std::size_t>(r.order[pos])] == matrix.photo_truth[j]) {
        r.rank_of_truth = static_cast<int>(pos) + 1;
        break;
      }
    }
    if (r.rank_of_truth == 0) {
      throw Error("photo '" + r.photo_id + "' has no matching candidate skull");
    }
    rankings.push_back(std::move(r));
  }
  return rankings;
}

Metrics compute_metrics(const std::vector<RankingResult>& rankings, int candidate_count) {
  if (rankings.empty()) throw EmptyRankings("no rankings to aggregate");
  Metrics m;
  m.photo_count = static_cast<int>(rankings.size());
  m.cmc.assign(static_cast<std::size_t>(candidate_count), 0.0);
  double rank_sum = 0.0;
  for (const auto& r : rankings) {
    rank_sum += r.rank_of_truth;
    if (r.rank_of_truth <= candidate_count) {
      m.cmc[static_cast<std::size_t>(r.rank_of_truth - 1)] += 1.0;
    }
  }
  double running = 0.0;
  for (auto& v : m.cmc) {
    running += v;
    v = running / static_cast<double>(rankings.size());
  }
  m.averaged_rank = rank_sum / static_cast<double>(rankings.size());
  m.accuracy_pct = m.cmc.empty() ? 0.0 : m.cmc.front() * 100.0;
  return m;
}

std::vector<SyntheticPhoto> build_gallery(const ExperimentConfig& config, const Population& pop) {
  if (pop.frame != Frame::kAligned) throw Error("build_gallery requires an aligned population");

  const auto set_ids = pop.registry->set_ids(config.landmark_set);
  const auto normals = aligned_outward_normals(*pop.registry, set_ids);
  const bool render_bone = config.fstt.thickness_mode == ThicknessMode::kNone;

  const CounterRng root{CounterRng::mix(config.seed ^ 0x5F0C0DE5ULL)};
  std::vector<SyntheticPhoto> gallery;
  gallery.reserve(pop.subjects.size() * 2 * static_cast<std::size_t>(config.photos_per_subject_per_pose));

  for (std::size_t si = 0; si < pop.subjects.size(); ++si) {
    const SubjectRecord& rec = pop.subjects[si];

    RenderInput input;
    for (std::size_t k = 0; k < set_ids.size(); ++k) {
      const LandmarkId lid = set_ids[k];
      if (!rec.has(lid)) continue;
      input.ids.push_back(lid);
      input.points.push_back(render_bone ? rec.at(lid).bone : rec.at(lid).skin);
      input.normals.push_back(normals[k]);
    }

    for (PoseClass pose : {PoseClass::kFrontal, PoseClass::kLateral}) {
      const auto pose_tag = static_cast<std::uint64_t>(pose == PoseClass::kFrontal ? 0 : 1);
      for (int rep = 0; rep < config.photos_per_subject_per_pose; ++rep) {
        const std::uint64_t photo_seed =
            root.stream(21, si, pose_tag).stream(static_cast<std::uint64_t>(rep)).key();
        const std::uint64_t noise_seed =
            root.stream(22, si, pose_tag).stream(static_cast<std::uint64_t>(rep)).key();
        const PhotoSpec spec =
            sample_spec(pose, config.noise_px, photo_seed, config.photo_ranges);
        const std::string photo_id = rec.subject_id +
                                     (pose == PoseClass::kFrontal ? "_f" : "_l") +
                                     std::to_string(rep);
        SyntheticPhoto photo = render(input, spec, config.visibility, photo_id, rec.subject_id);
        gallery.push_back(apply_noise(photo, config.noise_px, noise_seed));
      }
    }
  }
  return gallery;
}

std::pair<ComparisonMatrix, ExperimentReport> run_experiment(const ExperimentConfig& config,
                                                             const Population& population) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  const auto set_ids = population.registry->set_ids(config.landmark_set);

  FilterCriteria criteria;
  criteria.required = set_ids;
  auto [filtered, rejections] = filter_subjects(population, criteria);
  std::sort(filtered.subjects.begin(), filtered.subjects.end(),
            [](const SubjectRecord& a, const SubjectRecord& b) {
              return a.subject_id < b.subject_id;
            });

  auto [aligned, transforms] = pca_align(filtered);

  PopulationStats stats;
  const bool needs_stats = config.fstt.thickness_mode == ThicknessMode::kMean ||
                           (config.fstt.thickness_mode != ThicknessMode::kNone &&
                            config.fstt.direction_mode == DirectionMode::kMean);
  if (needs_stats) stats = compute_stats(aligned, set_ids);

  const std::vector<SyntheticPhoto> gallery = build_gallery(config, aligned);

  // FSTT-predicted model points per candidate skull.
  const std::size_t n_skulls = aligned.subjects.size();
  std::vector<CephPrediction> predictions;
  predictions.reserve(n_skulls);
  for (const auto& rec : aligned.subjects) {
    predictions.push_back(predict(rec, config.fstt, needs_stats ? &stats : nullptr, set_ids));
  }

  ComparisonMatrix matrix;
  matrix.skull_ids.reserve(n_skulls);
  for (const auto& rec : aligned.subjects) matrix.skull_ids.push_back(rec.subject_id);
  matrix.photo_ids.reserve(gallery.size());
  for (const auto& photo : gallery) {
    matrix.photo_ids.push_back(photo.photo_id);
    matrix.photo_truth.push_back(photo.subject_id);
    matrix.photo_pose.push_back(photo.spec.pose_class);
  }
  matrix.scores.assign(n_skulls * gallery.size(), kInf);

  // Photo observation arrays, flattened once for the solver loop.
  std::vector<std::vector<LandmarkId>> photo_ids(gallery.size());
  std::vector<std::vector<Point2>> photo_uv(gallery.size());
  for (std::size_t j = 0; j < gallery.size(); ++j) {
    photo_ids[j].reserve(gallery[j].observations.size());
    photo_uv[j].reserve(gallery[j].observations.size());
    for (const auto& obs : gallery[j].observations) {
      photo_ids[j].push_back(obs.id);
      photo_uv[j].push_back(obs.uv);
    }
  }

  SolverOptions solver_options = config.solver;
  solver_options.metric = config.metric;

  const std::size_t total_cells = n_skulls * gallery.size();
  std::atomic<std::size_t> next_cell{0};
  std::atomic<int> failures{0};

  const auto worker_fn = [&]() {
    for (;;) {
      const std::size_t cell = next_cell.fetch_add(1, std::memory_order_relaxed);
      if (cell >= total_cells) break;
      const std::size_t skull = cell / gallery.size();
      const std::size_t photo = cell % gallery.size();

      double similarity = kInf;
      SfoProblem problem;
      if (intersect_problem(predictions[skull].ids, predictions[skull].points, photo_ids[photo],
                            photo_uv[photo], gallery[photo].spec.image_width,
                            gallery[photo].spec.image_height, &problem)) {
        try {
          similarity = solve(problem, solver_options).similarity;
        } catch (const Error&) {
          similarity = kInf;
        }
      }
      if (!std::isfinite(similarity)) {
        similarity = kInf;
        failures.fetch_add(1, std::memory_order_relaxed);
      }
      matrix.scores[cell] = similarity;
    }
  };

  int worker_count = config.workers > 0
                         ? config.workers
                         : static_cast<int>(std::thread::hardware_concurrency());
  if (worker_count < 1) worker_count = 1;
  if (worker_count == 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker_fn);
    for (auto& t : pool) t.join();
  }

  const auto rankings = rank_queries(matrix);

  ExperimentReport report;
  report.experiment_id = config.experiment_id;
  report.landmark_count = static_cast<int>(set_ids.size());
  report.subject_count = static_cast<int>(n_skulls);
  report.photo_count = static_cast<int>(gallery.size());
  report.total_sfo = static_cast<long long>(total_cells);
  report.fstt_label = to_string(config.fstt.thickness_mode);
  report.direction_label = to_string(config.fstt.direction_mode);
  report.visibility_label = config.visibility.mode == VisibilityModel::Mode::kFixedCount
                                ? std::to_string(config.visibility.fixed_count) + "L"
                                : "geometric";
  report.noise_px = config.noise_px;
  report.seed = config.seed;
  report.overall = compute_metrics(rankings, static_cast<int>(n_skulls));
  report.solver_failures = failures.load();
  report.rejected_subjects = static_cast<int>(rejections.items.size());

  for (PoseClass pose : {PoseClass::kFrontal, PoseClass::kLateral}) {
    std::vector<RankingResult> subset;
    for (std::size_t j = 0; j < rankings.size(); ++j) {
      if (matrix.photo_pose[j] == pose) subset.push_back(rankings[j]);
    }
    if (!subset.empty()) {
      report.per_condition.push_back(
          {to_string(pose), compute_metrics(subset, static_cast<int>(n_skulls))});
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(matrix), std::move(report)};
}

}  // namespace cfsim

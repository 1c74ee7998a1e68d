#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsim/fstt.hpp"
#include "cfsim/photosim.hpp"
#include "cfsim/population.hpp"
#include "cfsim/sfo.hpp"

namespace cfsim {

/// Full description of one identification experiment run.
struct ExperimentConfig {
  std::string experiment_id = "E1";  // E1..E4
  LandmarkSet landmark_set = LandmarkSet::kSetA;
  int subject_count = 0;
  int photos_per_subject_per_pose = 5;
  FsttConfig fstt;
  VisibilityModel visibility;
  double noise_px = 0.0;
  std::uint64_t seed = 0;
  PhotoRanges photo_ranges;
  ScoreMetric metric = ScoreMetric::kRmse;
  SolverOptions solver;
  int workers = 0;  // 0 = hardware concurrency

  /// Enforce the per-experiment regime couplings (throws ConfigError):
  /// E1 is (real, real); E2 forces thickness none and skull-rendered photos;
  /// E3/E4 use mean thickness; E4 uses set_B and fixed-count visibility with
  /// k in {8, 10, 12, 14, 16}; noise is 0 or 5.
  void validate() const;
};

/// Candidate-by-photo similarity scores; +infinity marks failed overlays.
struct ComparisonMatrix {
  std::vector<std::string> skull_ids;      // rows, ascending subject id
  std::vector<std::string> photo_ids;      // columns, gallery order
  std::vector<std::string> photo_truth;    // ground-truth subject per column
  std::vector<PoseClass> photo_pose;       // per-column condition
  std::vector<double> scores;              // row-major

  std::size_t rows() const { return skull_ids.size(); }
  std::size_t cols() const { return photo_ids.size(); }
  double at(std::size_t skull, std::size_t photo) const {
    return scores[skull * cols() + photo];
  }
  double& at(std::size_t skull, std::size_t photo) { return scores[skull * cols() + photo]; }
};

/// Ranking of all candidates for one photo (query).
struct RankingResult {
  std::string photo_id;
  std::vector<int> order;  // candidate row indices, best first
  int rank_of_truth = 0;   // 1-based
};

struct Metrics {
  double averaged_rank = 0.0;
  double accuracy_pct = 0.0;
  std::vector<double> cmc;  // cmc[r-1] = fraction with rank <= r
  int photo_count = 0;
};

struct ExperimentReport {
  std::string experiment_id;
  int landmark_count = 0;
  int subject_count = 0;
  int photo_count = 0;
  long long total_sfo = 0;
  std::string fstt_label;
  std::string direction_label;
  std::string visibility_label;
  double noise_px = 0.0;
  std::uint64_t seed = 0;

  Metrics overall;
  struct Condition {
    std::string name;
    Metrics metrics;
  };
  std::vector<Condition> per_condition;

  int solver_failures = 0;
  int rejected_subjects = 0;

  // Runtime stats live here in memory but are serialized into the manifest,
  // not the report file, so reruns compare bit-identically.
  double wall_seconds = 0.0;
};

/// Rank candidates per photo by ascending similarity; ties break by
/// candidate row order (ascending subject id).
std::vector<RankingResult> rank_queries(const ComparisonMatrix& matrix);

/// Averaged rank, rank-1 accuracy and the full CMC curve.
/// Throws EmptyRankings on empty input.
Metrics compute_metrics(const std::vector<RankingResult>& rankings, int candidate_count);

/// Build the photo gallery for a population (already filtered + aligned).
std::vector<SyntheticPhoto> build_gallery(const ExperimentConfig& config, const Population& pop);

/// Run a full N x N experiment: filter + align the population, build the
/// gallery, solve every skull-photo overlay, rank and report. Deterministic
/// for a given seed at any worker count.
std::pair<ComparisonMatrix, ExperimentReport> run_experiment(const ExperimentConfig& config,
                                                             const Population& population);

}  // namespace cfsim

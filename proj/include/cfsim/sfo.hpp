#pragma once

#include <vector>

#include "cfsim/geometry.hpp"
#include "cfsim/landmarks.hpp"

namespace cfsim {

/// One skull-vs-photo overlay problem: FSTT-predicted 3D model points and
/// the photo's 2D observations, matched by landmark id. Construction sorts
/// by id and rejects duplicates or fewer than 4 correspondences.
struct SfoProblem {
  std::vector<LandmarkId> ids;
  std::vector<Point3> model_points;
  std::vector<Point2> observations;
  int image_width = 0;
  int image_height = 0;

  static SfoProblem make(std::vector<LandmarkId> ids, std::vector<Point3> model_points,
                         std::vector<Point2> observations, int image_width, int image_height);

  std::size_t size() const { return ids.size(); }
};

/// Intersect a model point list with a photo's observations by landmark id.
/// Returns false when fewer than 4 landmarks match (the pair then scores
/// +infinity upstream).
bool intersect_problem(const std::vector<LandmarkId>& model_ids,
                       const std::vector<Point3>& model_points,
                       const std::vector<LandmarkId>& photo_ids,
                       const std::vector<Point2>& photo_uv, int image_width, int image_height,
                       SfoProblem* out);

enum class ScoreMetric { kRmse, kMae };

struct SolverOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
  double cost_tolerance = 1e-12;  // relative cost decrease on accepted steps
  int multi_start = 3;            // number of ranked init directions to refine
  double good_enough_px = 1e-9;   // stop multi-starting below this similarity
  ScoreMetric metric = ScoreMetric::kRmse;
};

struct InitGuess {
  RigidPose pose;
  double focal = 1.0;
};

struct SfoSolution {
  RigidPose pose;
  double focal = 1.0;
  std::vector<double> residuals;  // per-landmark residual norms, pixels
  double similarity = 0.0;        // root mean squared residual norm, pixels
  bool converged = false;
  int iterations = 0;
};

/// Closed-form weak-perspective initialization: a 2D similarity fit between
/// the observations and orthographic projections of the model along each of
/// 26 lattice view directions; the best fit seeds rotation, focal*depth and
/// translation. Throws DegenerateConfiguration for (near-)collinear models.
InitGuess initialize(const SfoProblem& problem);

/// All 26 direction guesses ranked by weak-perspective fit residual.
std::vector<InitGuess> initialize_ranked(const SfoProblem& problem, int max_count);

/// Damped Gauss-Newton reprojection minimization over rotation (3),
/// translation (3) and focal (1), multi-started from the top-ranked
/// initialization directions; the best final cost wins. Residuals and the
/// similarity score are evaluated at the final iterate.
SfoSolution refine(const SfoProblem& problem, const InitGuess& init,
                   const SolverOptions& options = SolverOptions{});

/// initialize + refine.
SfoSolution solve(const SfoProblem& problem, const SolverOptions& options = SolverOptions{});

/// Reprojection similarity of a solution: RMSE (default) or MAE in pixels
/// over the matched landmarks. +infinity when the solution cannot project a
/// model point.
double score(const SfoProblem& problem, const SfoSolution& solution,
             ScoreMetric metric = ScoreMetric::kRmse);

/// Stacked reprojection residual (2n) and its analytic Jacobian (2n x 7)
/// with respect to [rotation tangent (3), translation (3), log focal];
/// exposed for derivative verification.
void residual_jacobian(const SfoProblem& problem, const RigidPose& pose, double focal,
                       Eigen::VectorXd* residual, Eigen::MatrixXd* jacobian);

}  // namespace cfsim

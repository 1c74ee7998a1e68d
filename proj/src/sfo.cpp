#include "cfsim/sfo.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfsim/errors.hpp"

namespace cfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;

Eigen::Matrix3d rotvec_to_matrix(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  Eigen::Matrix3d k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-12) {
    // Second-order expansion; deviation from SO(3) is O(theta^3).
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

struct State {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
  double log_focal;
};

/// Sum of squared reprojection residuals; +inf when any depth is invalid.
double evaluate_cost(const SfoProblem& p, const State& s) {
  const double f_px = std::exp(s.log_focal) * p.image_width;
  const double cu = p.image_width / 2.0;
  const double cv = p.image_height / 2.0;
  double cost = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point3 pc = s.rotation * p.model_points[i] + s.translation;
    if (!(pc.z() > kEpsilonDepth)) return kInf;
    const double du = cu + f_px * pc.x() / pc.z() - p.observations[i].x();
    const double dv = cv + f_px * pc.y() / pc.z() - p.observations[i].y();
    cost += du * du + dv * dv;
  }
  return std::isfinite(cost) ? cost : kInf;
}

/// Accumulate normal equations at the current state. Returns false when the
/// state cannot be linearized (invalid depth).
bool accumulate(const SfoProblem& p, const State& s, Matrix7d* h, Vector7d* g, double* cost) {
  const double f_px = std::exp(s.log_focal) * p.image_width;
  const double cu = p.image_width / 2.0;
  const double cv = p.image_height / 2.0;
  h->setZero();
  g->setZero();
  *cost = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point3 a = s.rotation * p.model_points[i];
    const Point3 pc = a + s.translation;
    if (!(pc.z() > kEpsilonDepth)) return false;
    const double inv_z = 1.0 / pc.z();
    const double x_z = pc.x() * inv_z;
    const double y_z = pc.y() * inv_z;
    const double ru = f_px * x_z + cu - p.observations[i].x();
    const double rv = f_px * y_z + cv - p.observations[i].y();

    // d(residual)/d(camera point), scaled by f_px / z.
    const double su = f_px * inv_z;
    Eigen::Matrix<double, 2, 3> d_pc;
    d_pc << su, 0, -su * x_z, 0, su, -su * y_z;

    // d(camera point)/d(rotation tangent) = -[R p]_x (left perturbation).
    Eigen::Matrix3d neg_skew;
    neg_skew << 0, a.z(), -a.y(), -a.z(), 0, a.x(), a.y(), -a.x(), 0;

    Eigen::Matrix<double, 2, 7> j;
    j.block<2, 3>(0, 0) = d_pc * neg_skew;
    j.block<2, 3>(0, 3) = d_pc;
    j(0, 6) = f_px * x_z;  // d(residual)/d(log focal)
    j(1, 6) = f_px * y_z;

    h->noalias() += j.transpose() * j;
    *g += j.transpose() * Eigen::Vector2d(ru, rv);
    *cost += ru * ru + rv * rv;
  }
  return std::isfinite(*cost) && h->allFinite() && g->allFinite();
}

SfoSolution finish_solution(const SfoProblem& p, const State& s, bool converged, int iterations,
                            ScoreMetric metric) {
  SfoSolution sol;
  sol.pose.rotation = s.rotation;
  sol.pose.translation = s.translation;
  sol.focal = std::exp(s.log_focal);
  sol.converged = converged;
  sol.iterations = iterations;
  sol.residuals.resize(p.size());

  const double f_px = sol.focal * p.image_width;
  const double cu = p.image_width / 2.0;
  const double cv = p.image_height / 2.0;
  double sum_sq = 0.0, sum_abs = 0.0;
  bool valid = true;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point3 pc = s.rotation * p.model_points[i] + s.translation;
    if (!(pc.z() > kEpsilonDepth)) {
      valid = false;
      break;
    }
    const double du = cu + f_px * pc.x() / pc.z() - p.observations[i].x();
    const double dv = cv + f_px * pc.y() / pc.z() - p.observations[i].y();
    const double norm = std::hypot(du, dv);
    sol.residuals[i] = norm;
    sum_sq += norm * norm;
    sum_abs += norm;
  }
  if (!valid) {
    std::fill(sol.residuals.begin(), sol.residuals.end(), kInf);
    sol.similarity = kInf;
    sol.converged = false;
    return sol;
  }
  const double n = static_cast<double>(p.size());
  sol.similarity =
      metric == ScoreMetric::kRmse ? std::sqrt(sum_sq / n) : sum_abs / n;
  return sol;
}

/// Levenberg-damped Gauss-Newton from one start.
SfoSolution run_lm(const SfoProblem& p, const State& start, const SolverOptions& opt) {
  State state = start;
  double cost = evaluate_cost(p, state);
  if (!std::isfinite(cost)) {
    SfoSolution sol = finish_solution(p, state, false, 0, opt.metric);
    sol.similarity = kInf;
    return sol;
  }

  Matrix7d h;
  Vector7d g;
  double lambda = 1e-4;
  bool converged = false;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    double lin_cost;
    if (!accumulate(p, state, &h, &g, &lin_cost)) {
      throw NumericalFailure("non-finite cost or Jacobian during refinement");
    }

    bool stepped = false;
    while (lambda < 1e14) {
      Matrix7d damped = h;
      for (int d = 0; d < 7; ++d) damped(d, d) += lambda * std::max(h(d, d), 1e-12);
      const Vector7d delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 4.0;
        continue;
      }
      State candidate;
      candidate.rotation = rotvec_to_matrix(delta.head<3>()) * state.rotation;
      candidate.translation = state.translation + delta.segment<3>(3);
      candidate.log_focal = state.log_focal + delta(6);
      const double new_cost = evaluate_cost(p, candidate);
      if (new_cost < cost) {
        const double rel_decrease = (cost - new_cost) / std::max(cost, 1e-300);
        state = candidate;
        cost = new_cost;
        lambda = std::max(lambda * 0.25, 1e-12);
        stepped = true;
        if (delta.norm() < opt.step_tolerance || rel_decrease < opt.cost_tolerance) {
          converged = true;
        }
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) {
      // No acceptable step at any damping: local minimum to working precision.
      converged = true;
    }
    if (converged) {
      ++iter;
      break;
    }
  }
  return finish_solution(p, state, converged, iter, opt.metric);
}

}  // namespace

SfoProblem SfoProblem::make(std::vector<LandmarkId> ids, std::vector<Point3> model_points,
                            std::vector<Point2> observations, int image_width, int image_height) {
  if (ids.size() != model_points.size() || ids.size() != observations.size()) {
    throw InvalidSpec("SfoProblem arrays disagree in length");
  }
  if (ids.size() < 4) {
    throw InvalidSpec("SfoProblem needs at least 4 correspondences, got " +
                      std::to_string(ids.size()));
  }
  if (image_width <= 0 || image_height <= 0) {
    throw InvalidSpec("SfoProblem image dimensions must be positive");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  SfoProblem p;
  p.image_width = image_width;
  p.image_height = image_height;
  p.ids.reserve(ids.size());
  p.model_points.reserve(ids.size());
  p.observations.reserve(ids.size());
  for (std::size_t k : order) {
    if (!p.ids.empty() && p.ids.back() == ids[k]) {
      throw InvalidSpec("duplicate landmark id " + std::to_string(ids[k]) + " in SfoProblem");
    }
    p.ids.push_back(ids[k]);
    p.model_points.push_back(model_points[k]);
    p.observations.push_back(observations[k]);
  }
  return p;
}

bool intersect_problem(const std::vector<LandmarkId>& model_ids,
                       const std::vector<Point3>& model_points,
                       const std::vector<LandmarkId>& photo_ids,
                       const std::vector<Point2>& photo_uv, int image_width, int image_height,
                       SfoProblem* out) {
  std::vector<LandmarkId> ids;
  std::vector<Point3> pts;
  std::vector<Point2> uv;
  // Both id lists are sorted; merge them.
  std::size_t a = 0, b = 0;
  while (a < model_ids.size() && b < photo_ids.size()) {
    if (model_ids[a] < photo_ids[b]) {
      ++a;
    } else if (photo_ids[b] < model_ids[a]) {
      ++b;
    } else {
      ids.push_back(photo_ids[b]);
      pts.push_back(model_points[a]);
      uv.push_back(photo_uv[b]);
      ++a;
      ++b;
    }
  }
  if (ids.size() < 4) return false;
  *out = SfoProblem::make(std::move(ids), std::move(pts), std::move(uv), image_width, image_height);
  return true;
}

std::vector<InitGuess> initialize_ranked(const SfoProblem& problem, int max_count) {
  const std::size_t n = problem.size();

  Point3 centroid = Point3::Zero();
  for (const Point3& p : problem.model_points) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : problem.model_points) {
    const Point3 d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
  eig.computeDirect(cov);
  if (!(eig.eigenvalues()(1) > 1e-10 * std::max(eig.eigenvalues()(2), 1e-300))) {
    throw DegenerateConfiguration("model points are collinear within tolerance");
  }

  Point2 obs_mean = Point2::Zero();
  for (const Point2& o : problem.observations) obs_mean += o;
  obs_mean /= static_cast<double>(n);

  struct Candidate {
    double residual;
    int index;
    InitGuess guess;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(26);

  const Point2 pp(problem.image_width / 2.0, problem.image_height / 2.0);
  int index = 0;
  for (int ix = -1; ix <= 1; ++ix) {
    for (int iy = -1; iy <= 1; ++iy) {
      for (int iz = -1; iz <= 1; ++iz) {
        if (ix == 0 && iy == 0 && iz == 0) continue;
        const Eigen::Vector3d view = Eigen::Vector3d(ix, iy, iz).normalized();
        // Orthonormal camera basis with z-axis = view.
        const Eigen::Vector3d ref =
            std::abs(view.y()) < 0.9 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitX();
        const Eigen::Vector3d axis_a = ref.cross(view).normalized();
        const Eigen::Vector3d axis_b = view.cross(axis_a);

        // 2D similarity (Procrustes) fit of the orthographic projection to
        // the observations, in complex form.
        double zr = 0.0, zi = 0.0, qq = 0.0;
        Eigen::Vector2d q_mean = Eigen::Vector2d::Zero();
        std::vector<Eigen::Vector2d> q(n);
        for (std::size_t i = 0; i < n; ++i) {
          const Point3 d = problem.model_points[i] - centroid;
          q[i] = Eigen::Vector2d(axis_a.dot(d), axis_b.dot(d));
          q_mean += q[i];
        }
        q_mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const Eigen::Vector2d qc = q[i] - q_mean;
          const Eigen::Vector2d oc = problem.observations[i] - obs_mean;
          zr += oc.x() * qc.x() + oc.y() * qc.y();
          zi += oc.y() * qc.x() - oc.x() * qc.y();
          qq += qc.squaredNorm();
        }
        if (!(qq > 0.0)) continue;
        const double scale = std::hypot(zr, zi) / qq;
        if (!(scale > 0.0) || !std::isfinite(scale)) continue;
        const double theta = std::atan2(zi, zr);

        double residual = 0.0;
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t i = 0; i < n; ++i) {
          const Eigen::Vector2d qc = q[i] - q_mean;
          const Eigen::Vector2d fit(scale * (c * qc.x() - s * qc.y()),
                                    scale * (s * qc.x() + c * qc.y()));
          residual += (problem.observations[i] - obs_mean - fit).squaredNorm();
        }

        Eigen::Matrix3d r_dir;
        r_dir.row(0) = axis_a;
        r_dir.row(1) = axis_b;
        r_dir.row(2) = view;
        Eigen::Matrix3d rz;
        rz << c, -s, 0, s, c, 0, 0, 0, 1;
        InitGuess guess;
        guess.pose.rotation = rz * r_dir;
        guess.focal = 1.0;

        const double f_px = guess.focal * problem.image_width;
        const double mean_depth = f_px / scale;
        const Eigen::Vector2d t_xy = (obs_mean - pp) / scale;
        const double model_depth = (guess.pose.rotation.row(2) * centroid).value();
        guess.pose.translation =
            Eigen::Vector3d(t_xy.x() - (guess.pose.rotation.row(0) * centroid).value(),
                            t_xy.y() - (guess.pose.rotation.row(1) * centroid).value(),
                            mean_depth - model_depth);
        candidates.push_back({residual, index, guess});
        ++index;
      }
    }
  }
  if (candidates.empty()) {
    throw DegenerateConfiguration("no usable initialization direction");
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.residual != b.residual ? a.residual < b.residual : a.index < b.index;
  });

  std::vector<InitGuess> out;
  const int count = std::min<int>(max_count, static_cast<int>(candidates.size()));
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(candidates[static_cast<std::size_t>(i)].guess);
  return out;
}

InitGuess initialize(const SfoProblem& problem) { return initialize_ranked(problem, 1).front(); }

SfoSolution refine(const SfoProblem& problem, const InitGuess& init, const SolverOptions& options) {
  SfoSolution best;
  best.similarity = kInf;

  std::vector<InitGuess> starts;
  starts.push_back(init);
  if (options.multi_start > 1) {
    for (const InitGuess& g : initialize_ranked(problem, options.multi_start)) {
      // The caller-provided init is usually the top-ranked one; keep the
      // list deduplicated so work is not repeated.
      const bool duplicate =
          (g.pose.rotation - init.pose.rotation).cwiseAbs().maxCoeff() < 1e-12 &&
          (g.pose.translation - init.pose.translation).cwiseAbs().maxCoeff() < 1e-12 &&
          std::abs(g.focal - init.focal) < 1e-12;
      if (!duplicate) starts.push_back(g);
    }
    if (starts.size() > static_cast<std::size_t>(options.multi_start)) {
      starts.resize(static_cast<std::size_t>(options.multi_start));
    }
  }

  int total_iterations = 0;
  bool have_solution = false;
  for (const InitGuess& start : starts) {
    State s;
    s.rotation = start.pose.rotation;
    s.translation = start.pose.translation;
    s.log_focal = std::log(start.focal);
    SfoSolution sol = run_lm(problem, s, options);
    total_iterations += sol.iterations;
    if (!have_solution || sol.similarity < best.similarity) {
      best = std::move(sol);
      have_solution = true;
    }
    if (best.similarity < options.good_enough_px) break;
  }
  best.iterations = total_iterations;
  return best;
}

SfoSolution solve(const SfoProblem& problem, const SolverOptions& options) {
  return refine(problem, initialize(problem), options);
}

double score(const SfoProblem& problem, const SfoSolution& solution, ScoreMetric metric) {
  const double f_px = solution.focal * problem.image_width;
  const double cu = problem.image_width / 2.0;
  const double cv = problem.image_height / 2.0;
  double sum_sq = 0.0, sum_abs = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const Point3 pc = solution.pose.apply(problem.model_points[i]);
    if (!(pc.z() > kEpsilonDepth)) return kInf;
    const double du = cu + f_px * pc.x() / pc.z() - problem.observations[i].x();
    const double dv = cv + f_px * pc.y() / pc.z() - problem.observations[i].y();
    const double norm = std::hypot(du, dv);
    sum_sq += norm * norm;
    sum_abs += norm;
  }
  const double n = static_cast<double>(problem.size());
  const double value = metric == ScoreMetric::kRmse ? std::sqrt(sum_sq / n) : sum_abs / n;
  return std::isfinite(value) ? value : kInf;
}

void residual_jacobian(const SfoProblem& problem, const RigidPose& pose, double focal,
                       Eigen::VectorXd* residual, Eigen::MatrixXd* jacobian) {
  const std::size_t n = problem.size();
  residual->resize(static_cast<Eigen::Index>(2 * n));
  jacobian->resize(static_cast<Eigen::Index>(2 * n), 7);
  const double f_px = focal * problem.image_width;
  const double cu = problem.image_width / 2.0;
  const double cv = problem.image_height / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 a = pose.rotation * problem.model_points[i];
    const Point3 pc = a + pose.translation;
    if (!(pc.z() > kEpsilonDepth)) {
      throw NonPositiveDepth("residual_jacobian: model point behind the camera");
    }
    const double inv_z = 1.0 / pc.z();
    const double x_z = pc.x() * inv_z;
    const double y_z = pc.y() * inv_z;
    (*residual)(static_cast<Eigen::Index>(2 * i)) = f_px * x_z + cu - problem.observations[i].x();
    (*residual)(static_cast<Eigen::Index>(2 * i + 1)) =
        f_px * y_z + cv - problem.observations[i].y();

    const double su = f_px * inv_z;
    Eigen::Matrix<double, 2, 3> d_pc;
    d_pc << su, 0, -su * x_z, 0, su, -su * y_z;
    Eigen::Matrix3d neg_skew;
    neg_skew << 0, a.z(), -a.y(), -a.z(), 0, a.x(), a.y(), -a.x(), 0;

    jacobian->block<2, 3>(static_cast<Eigen::Index>(2 * i), 0) = d_pc * neg_skew;
    jacobian->block<2, 3>(static_cast<Eigen::Index>(2 * i), 3) = d_pc;
    (*jacobian)(static_cast<Eigen::Index>(2 * i), 6) = f_px * x_z;
    (*jacobian)(static_cast<Eigen::Index>(2 * i + 1), 6) = f_px * y_z;
  }
}

}  // namespace cfsim

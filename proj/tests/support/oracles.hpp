#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive and share no code with the library paths they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "cfsim/geometry.hpp"
#include "cfsim/rng.hpp"

namespace cfsim::testing {

/// Projection through an explicit 4x4 homogeneous pipeline.
inline Point2 project_homogeneous(const CameraModel& camera, const RigidPose& pose,
                                  const Point3& p) {
  Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();
  extrinsic.topLeftCorner<3, 3>() = pose.rotation;
  extrinsic.topRightCorner<3, 1>() = pose.translation;
  Eigen::Matrix<double, 3, 4> intrinsic = Eigen::Matrix<double, 3, 4>::Zero();
  const double f = camera.focal * camera.image_width;
  intrinsic(0, 0) = f;
  intrinsic(1, 1) = f;
  intrinsic(0, 2) = camera.principal_point.x();
  intrinsic(1, 2) = camera.principal_point.y();
  intrinsic(2, 2) = 1.0;
  const Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
  const Eigen::Vector3d uvw = intrinsic * (extrinsic * ph);
  return Point2(uvw.x() / uvw.z(), uvw.y() / uvw.z());
}

/// Uniformly distributed random rotation (quaternion method).
inline Eigen::Matrix3d random_rotation(CounterRng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double pi2 = 2.0 * 3.14159265358979323846;
  Eigen::Quaterniond q(a * std::sin(pi2 * u2), a * std::cos(pi2 * u2), b * std::sin(pi2 * u3),
                       b * std::cos(pi2 * u3));
  return q.normalized().toRotationMatrix();
}

/// Two-sided Kolmogorov-Smirnov test statistic against U(lo, hi).
inline double ks_statistic_uniform(std::vector<double> samples, double lo, double hi) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = (samples[i] - lo) / (hi - lo);
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
  }
  return d;
}

/// Nelder-Mead simplex minimizer; derivative-free polish for the grid
/// oracle. Runs until the simplex collapses below `tol` or `max_iter`.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& start, double step, double tol,
                                   int max_iter) {
  const int n = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), start);
  std::vector<double> value(static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < simplex.size(); ++i) value[i] = f(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
    const std::size_t best = order.front(), worst = order.back(),
                      second_worst = order[order.size() - 2];

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i : order) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    double spread = 0.0;
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      spread = std::max(spread, (simplex[i] - simplex[best]).norm());
    }
    if (spread < tol && std::abs(value[worst] - value[best]) < tol) break;

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < value[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        value[worst] = fe;
      } else {
        simplex[worst] = reflected;
        value[worst] = fr;
      }
    } else if (fr < value[second_worst]) {
      simplex[worst] = reflected;
      value[worst] = fr;
    } else {
      const Eigen::VectorXd contracted = centroid + 0.5 * (simplex[worst] - centroid);
      const double fc = f(contracted);
      if (fc < value[worst]) {
        simplex[worst] = contracted;
        value[worst] = fc;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          value[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < simplex.size(); ++i) {
    if (value[i] < value[best]) best = i;
  }
  return simplex[best];
}

}  // namespace cfsim::testing

#include "cfsim/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace cfsim {

namespace {

constexpr double kDegPerRad = 57.29577951308232087680;

Eigen::Matrix3d rot_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

}  // namespace

bool RigidPose::is_valid(double tol) const {
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rotation.determinant() - 1.0) > tol) return false;
  return translation.allFinite();
}

Eigen::Vector3d RigidPose::euler_deg() const {
  // R = Ry(y) * Rx(p) * Rz(r); see rotation composition above.
  const Eigen::Matrix3d& m = rotation;
  const double sp = -m(1, 2);
  double yaw, pitch, roll;
  if (std::abs(sp) < 1.0 - 1e-12) {
    pitch = std::asin(sp);
    yaw = std::atan2(m(0, 2), m(2, 2));
    roll = std::atan2(m(1, 0), m(1, 1));
  } else {
    // Gimbal: pitch at +-90 deg, split the remaining rotation into yaw.
    pitch = std::copysign(std::asin(1.0), sp);
    yaw = std::atan2(-m(2, 0), m(0, 0));
    roll = 0.0;
  }
  return Eigen::Vector3d(yaw, pitch, roll) * kDegPerRad;
}

RigidPose RigidPose::from_euler_deg(double yaw, double pitch, double roll,
                                    const Eigen::Vector3d& translation) {
  const double d2r = 1.0 / kDegPerRad;
  RigidPose pose;
  pose.rotation = rot_y(yaw * d2r) * rot_x(pitch * d2r) * rot_z(roll * d2r);
  pose.translation = translation;
  return pose;
}

Point2 project(const CameraModel& camera, const RigidPose& pose, const Point3& p) {
  const Point3 pc = pose.apply(p);
  if (!(pc.z() > kEpsilonDepth)) {
    throw NonPositiveDepth("point depth " + std::to_string(pc.z()) +
                           " is behind or on the camera plane");
  }
  const double f = camera.focal_px();
  return Point2(camera.principal_point.x() + f * pc.x() / pc.z(),
                camera.principal_point.y() + f * pc.y() / pc.z());
}

namespace {

double coordinate_skewness(std::span<const Point3> cloud, const Point3& centroid,
                           const Eigen::Vector3d& axis) {
  double m2 = 0.0, m3 = 0.0;
  for (const Point3& p : cloud) {
    const double c = axis.dot(p - centroid);
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= static_cast<double>(cloud.size());
  m3 /= static_cast<double>(cloud.size());
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

// True when the coordinate sequence of `a` beats `b` lexicographically.
bool lexicographically_greater(std::span<const Point3> cloud, const Point3& centroid,
                               const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  for (const Point3& p : cloud) {
    const Point3 pa = a * (p - centroid);
    const Point3 pb = b * (p - centroid);
    for (int i = 0; i < 3; ++i) {
      if (pa[i] != pb[i]) return pa[i] > pb[i];
    }
  }
  return false;
}

}  // namespace

AlignmentTransform compute_principal_frame(std::span<const Point3> cloud,
                                           std::span<const Point3> midline) {
  if (cloud.size() < 3) {
    throw DegenerateCloud("principal frame needs at least 3 landmarks, got " +
                          std::to_string(cloud.size()));
  }
  if (midline.empty()) {
    throw DegenerateCloud("no midline landmarks present for sign fixing");
  }

  Point3 centroid = Point3::Zero();
  for (const Point3& p : cloud) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : cloud) {
    const Point3 d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(cloud.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  solver.computeDirect(cov);
  const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
  if (!(evals[0] > 1e-10 * std::max(evals[2], 1e-300))) {
    throw DegenerateCloud("landmark covariance is rank-deficient (eigenvalues " +
                          std::to_string(evals[0]) + ", " + std::to_string(evals[1]) + ", " +
                          std::to_string(evals[2]) + ")");
  }

  Point3 midline_mean = Point3::Zero();
  for (const Point3& p : midline) midline_mean += p;
  midline_mean = midline_mean / static_cast<double>(midline.size()) - centroid;

  // Forward axis: the eigen axis carrying the midline-landmark mean.
  int fwd_idx = 0;
  double best = -1.0;
  for (int i = 0; i < 3; ++i) {
    const double c = std::abs(midline_mean.dot(solver.eigenvectors().col(i)));
    if (c > best) {
      best = c;
      fwd_idx = i;
    }
  }
  Eigen::Vector3d fwd = solver.eigenvectors().col(fwd_idx);
  if (midline_mean.dot(fwd) < 0.0) fwd = -fwd;

  // Of the remaining eigen axes, the larger-variance one becomes X.
  int rem[2], n = 0;
  for (int i = 0; i < 3; ++i) {
    if (i != fwd_idx) rem[n++] = i;
  }
  const int lat_idx = evals[rem[0]] >= evals[rem[1]] ? rem[0] : rem[1];
  const Eigen::Vector3d lat = solver.eigenvectors().col(lat_idx);

  const auto make_frame = [&](const Eigen::Vector3d& x_axis) {
    Eigen::Matrix3d r;
    const Eigen::Vector3d z_axis = -fwd;
    r.row(0) = x_axis;
    r.row(1) = z_axis.cross(x_axis);
    r.row(2) = z_axis;
    return r;
  };

  const Eigen::Matrix3d plus = make_frame(lat);
  const Eigen::Matrix3d minus = make_frame(-lat);

  // Residual sign pair: positive skew along Y, lexicographic fallback.
  const double skew = coordinate_skewness(cloud, centroid, plus.row(1));
  Eigen::Matrix3d rotation;
  if (std::abs(skew) > 1e-9) {
    rotation = skew > 0.0 ? plus : minus;
  } else {
    rotation = lexicographically_greater(cloud, centroid, plus, minus) ? plus : minus;
  }

  return AlignmentTransform{rotation, -(rotation * centroid)};
}

}  // namespace cfsim

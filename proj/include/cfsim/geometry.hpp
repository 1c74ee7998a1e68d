#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "cfsim/errors.hpp"

namespace cfsim {

using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

/// Depth below which a point counts as behind the camera plane.
inline constexpr double kEpsilonDepth = 1e-9;

/// Rigid world-to-camera transform: x_cam = rotation * p + translation.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// True when rotation is orthonormal with determinant +1 (tol 1e-9).
  bool is_valid(double tol = 1e-9) const;

  /// Intrinsic yaw/pitch/roll (degrees), R = Ry(yaw) * Rx(pitch) * Rz(roll).
  Eigen::Vector3d euler_deg() const;
  static RigidPose from_euler_deg(double yaw, double pitch, double roll,
                                  const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  /// Camera center in world coordinates (-R^T t).
  Point3 camera_center() const { return -rotation.transpose() * translation; }
};

/// Pinhole camera. Focal is a multiplier of image width: f_px = focal * width,
/// which maps the procedure's focal range [0.5, 1.5] to horizontal fields of
/// view of roughly 90 down to 37 degrees.
struct CameraModel {
  double focal = 1.0;
  Point2 principal_point = Point2::Zero();
  int image_width = 0;
  int image_height = 0;

  double focal_px() const { return focal * image_width; }

  static CameraModel centered(double focal, int width, int height) {
    return CameraModel{focal, Point2(width / 2.0, height / 2.0), width, height};
  }
};

/// Rigid map from the dataset frame to the common aligned frame:
/// p_aligned = rotation * p + translation.
struct AlignmentTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  AlignmentTransform inverse() const {
    return AlignmentTransform{rotation.transpose(), -(rotation.transpose() * translation)};
  }
};

/// Perspective projection of a world point.
///
/// u = pp.u + f_px * X/Z, v = pp.v + f_px * Y/Z with (X,Y,Z) = R*p + t.
/// Throws NonPositiveDepth when Z <= kEpsilonDepth.
Point2 project(const CameraModel& camera, const RigidPose& pose, const Point3& p);

/// Principal frame of a landmark cloud, used for population alignment.
///
/// The cloud centroid maps to the origin. The eigen axis carrying the
/// midline-landmark mean becomes the (negated) Z axis, oriented so the
/// midline mean has positive component along the face-forward direction;
/// of the two remaining eigen axes the larger-variance one becomes X. The
/// residual sign pair is fixed by requiring positive skewness of the cloud's
/// Y coordinates, falling back to a lexicographic comparison when the skew
/// is indecisive. The result is deterministic and invariant to rigid motion
/// of the input.
///
/// Throws DegenerateCloud when the covariance is rank-deficient (rank < 3
/// beyond tolerance) or when `midline` is empty.
AlignmentTransform compute_principal_frame(std::span<const Point3> cloud,
                                           std::span<const Point3> midline);

/// Unit direction from an aligned subject toward a frontal camera.
inline Point3 face_forward_axis() { return Point3(0.0, 0.0, -1.0); }

}  // namespace cfsim

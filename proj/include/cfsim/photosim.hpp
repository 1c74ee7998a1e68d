#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfsim/geometry.hpp"
#include "cfsim/landmarks.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

enum class PoseClass { kFrontal, kLateral };

std::string to_string(PoseClass pose);
PoseClass pose_class_from_string(const std::string& s);

/// Randomized photo parameter ranges (defaults follow the simulation
/// procedure: focal [0.5, 1.5], rotation offsets [-15, 15] degrees, width
/// [600, 1200], height [600, 1000]).
struct PhotoRanges {
  double focal_min = 0.5;
  double focal_max = 1.5;
  double rotation_max_deg = 15.0;
  int width_min = 600;
  int width_max = 1200;
  int height_min = 600;
  int height_max = 1000;
};

/// One simulated photograph's randomized parameters.
struct PhotoSpec {
  PoseClass pose_class = PoseClass::kFrontal;
  double yaw_deg = 0.0;    // offsets around the pose-class base orientation
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  double focal = 1.0;
  int image_width = 0;
  int image_height = 0;
  double noise_px = 0.0;
  std::uint64_t rng_seed = 0;  // stream key used for visibility draws
};

struct VisibilityModel {
  enum class Mode { kGeometric, kFixedCount };
  Mode mode = Mode::kGeometric;
  int fixed_count = 0;          // exact observation count in fixed-count mode
  double half_angle_deg = 70.0; // geometric threshold (calibrated once so the
                                // frontal/lateral visible-count ranges hold)
};

struct Observation {
  LandmarkId id = -1;
  Point2 uv = Point2::Zero();
};

/// Ground-truth camera of a simulated photo. Kept separate so solver-facing
/// code paths never receive it; it is consumed by evaluation only.
struct PhotoGroundTruth {
  CameraModel camera;
  RigidPose pose;
};

struct SyntheticPhoto {
  std::string photo_id;
  std::string subject_id;
  PhotoSpec spec;
  std::vector<Observation> observations;  // sorted by landmark id
  PhotoGroundTruth ground_truth;

  std::vector<LandmarkId> visible_set() const {
    std::vector<LandmarkId> ids;
    ids.reserve(observations.size());
    for (const auto& obs : observations) ids.push_back(obs.id);
    return ids;
  }
};

/// Landmark positions to photograph, with per-landmark outward normals in
/// the same (aligned) frame driving the geometric visibility test.
struct RenderInput {
  std::vector<LandmarkId> ids;
  std::vector<Point3> points;
  std::vector<Point3> normals;
};

/// Base orientation of a pose class: frontal is the identity (the aligned
/// frame already faces the camera), lateral is a 90-degree yaw.
Eigen::Matrix3d pose_class_base(PoseClass pose);

/// Template outward directions rotated into the common aligned frame of the
/// given landmark set.
std::vector<Point3> aligned_outward_normals(const LandmarkRegistry& registry,
                                            const std::vector<LandmarkId>& ids);

/// Deterministic random draw of photo parameters.
PhotoSpec sample_spec(PoseClass pose_class, double noise_px, std::uint64_t seed,
                      const PhotoRanges& ranges = PhotoRanges{});

/// Project the input landmarks through a camera placed so the landmark cloud
/// spans 70% of the smaller image dimension, centered on the principal
/// point. Visibility follows the model (geometric back-face threshold,
/// optionally reduced to a fixed-size random subset). Throws TooFewVisible
/// when fewer than 4 landmarks remain.
SyntheticPhoto render(const RenderInput& input, const PhotoSpec& spec,
                      const VisibilityModel& visibility, const std::string& photo_id,
                      const std::string& subject_id);

/// Displace each observation by an independent uniform draw from the square
/// [-noise_px, +noise_px]^2. noise_px == 0 returns the photo unchanged.
SyntheticPhoto apply_noise(const SyntheticPhoto& photo, double noise_px, std::uint64_t seed);

/// Photo-set CSV plus sidecar with specs and a clearly delimited
/// evaluation-only ground-truth section.
void save_photos(const std::vector<SyntheticPhoto>& photos, const LandmarkRegistry& registry,
                 const std::string& csv_path);
std::vector<SyntheticPhoto> load_photos(const std::string& csv_path,
                                        const LandmarkRegistry& registry);

}  // namespace cfsim

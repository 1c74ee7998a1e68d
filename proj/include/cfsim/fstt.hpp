#pragma once

#include <string>
#include <vector>

#include "cfsim/population.hpp"

namespace cfsim {

enum class ThicknessMode { kReal, kMean, kNone };
enum class DirectionMode { kReal, kMean };

std::string to_string(ThicknessMode mode);
std::string to_string(DirectionMode mode);
ThicknessMode thickness_mode_from_string(const std::string& s);
DirectionMode direction_mode_from_string(const std::string& s);

/// Soft-tissue knowledge regime. (real, real) is full knowledge, thickness
/// none collapses the prediction onto the bone (skull-vs-skull comparison),
/// and the mean modes substitute population averages for per-subject values.
struct FsttConfig {
  ThicknessMode thickness_mode = ThicknessMode::kReal;
  DirectionMode direction_mode = DirectionMode::kReal;
};

/// Predicted face-landmark positions for one subject in the aligned frame.
struct CephPrediction {
  std::vector<LandmarkId> ids;
  std::vector<Point3> points;
  FsttConfig regime;
};

/// Predict cephalometric (skin) positions from craniometric (bone) ones:
/// prediction = bone + t * d with t and d chosen per the config, using
/// population stats for the mean modes. Throws MissingStats when a mean mode
/// is requested without stats, MissingLandmark when a landmark in `ids` is
/// absent from the subject.
CephPrediction predict(const SubjectRecord& subject, const FsttConfig& config,
                       const PopulationStats* stats, const std::vector<LandmarkId>& ids);

}  // namespace cfsim

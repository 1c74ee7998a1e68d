#include "cfsim/fstt.hpp"

#include "cfsim/errors.hpp"

namespace cfsim {

std::string to_string(ThicknessMode mode) {
  switch (mode) {
    case ThicknessMode::kReal: return "real";
    case ThicknessMode::kMean: return "mean";
    case ThicknessMode::kNone: return "none";
  }
  return "real";
}

std::string to_string(DirectionMode mode) {
  return mode == DirectionMode::kReal ? "real" : "mean";
}

ThicknessMode thickness_mode_from_string(const std::string& s) {
  if (s == "real") return ThicknessMode::kReal;
  if (s == "mean") return ThicknessMode::kMean;
  if (s == "none") return ThicknessMode::kNone;
  throw ConfigError("unknown thickness mode '" + s + "'");
}

DirectionMode direction_mode_from_string(const std::string& s) {
  if (s == "real") return DirectionMode::kReal;
  if (s == "mean") return DirectionMode::kMean;
  throw ConfigError("unknown direction mode '" + s + "'");
}

CephPrediction predict(const SubjectRecord& subject, const FsttConfig& config,
                       const PopulationStats* stats, const std::vector<LandmarkId>& ids) {
  const bool needs_stats = config.thickness_mode == ThicknessMode::kMean ||
                           (config.thickness_mode != ThicknessMode::kNone &&
                            config.direction_mode == DirectionMode::kMean);
  if (needs_stats && stats == nullptr) {
    throw MissingStats("mean-mode prediction requires population stats");
  }

  CephPrediction pred;
  pred.regime = config;
  pred.ids.reserve(ids.size());
  pred.points.reserve(ids.size());

  for (LandmarkId lid : ids) {
    if (!subject.has(lid)) {
      throw MissingLandmark("subject '" + subject.subject_id + "' is missing landmark id " +
                            std::to_string(lid));
    }
    const LandmarkSample& sample = subject.at(lid);

    Point3 prediction;
    if (config.thickness_mode == ThicknessMode::kNone) {
      prediction = sample.bone;
    } else {
      const bool uses_mean = config.thickness_mode == ThicknessMode::kMean ||
                             config.direction_mode == DirectionMode::kMean;
      if (uses_mean && stats->at(lid).sample_count < 2) {
        throw MissingStats("no population stats for landmark id " + std::to_string(lid));
      }
      double t;
      if (config.thickness_mode == ThicknessMode::kReal) {
        t = (sample.skin - sample.bone).norm();
      } else {
        t = stats->at(lid).mean_thickness;
      }
      Point3 d;
      if (config.direction_mode == DirectionMode::kReal) {
        const Point3 v = sample.skin - sample.bone;
        const double norm = v.norm();
        if (!(norm > 1e-12)) {
          throw MissingLandmark("subject '" + subject.subject_id +
                                "' has a zero soft-tissue vector at landmark id " +
                                std::to_string(lid) + "; real direction undefined");
        }
        d = v / norm;
      } else {
        d = stats->at(lid).mean_direction;
      }
      prediction = sample.bone + t * d;
    }
    pred.ids.push_back(lid);
    pred.points.push_back(prediction);
  }
  return pred;
}

}  // namespace cfsim

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/geometry.hpp"
#include "cfsim/landmarks.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

enum class Sex { kMale, kFemale };
enum class Frame { kDataset, kAligned };

/// One landmark of one subject: paired bone/skin coordinates.
struct LandmarkSample {
  bool present = false;
  Point3 bone = Point3::Zero();
  Point3 skin = Point3::Zero();
};

/// One individual's paired skull/face landmark coordinates plus metadata.
struct SubjectRecord {
  std::string subject_id;
  Sex sex = Sex::kMale;
  int age = 0;
  std::vector<LandmarkSample> landmarks;  // indexed by LandmarkId

  bool has(LandmarkId id) const {
    return id >= 0 && id < static_cast<LandmarkId>(landmarks.size()) &&
           landmarks[static_cast<std::size_t>(id)].present;
  }
  const LandmarkSample& at(LandmarkId id) const {
    return landmarks.at(static_cast<std::size_t>(id));
  }
  /// Soft-tissue thickness |skin - bone| in mm.
  double thickness(LandmarkId id) const { return (at(id).skin - at(id).bone).norm(); }
};

struct Population {
  std::shared_ptr<const LandmarkRegistry> registry;
  std::vector<SubjectRecord> subjects;
  Frame frame = Frame::kDataset;
};

/// Per-landmark population soft-tissue statistics in the aligned frame.
struct PopulationStats {
  struct Entry {
    double mean_thickness = 0.0;
    Point3 mean_direction = Point3::Zero();
    int sample_count = 0;
  };
  std::vector<Entry> per_landmark;  // indexed by LandmarkId

  const Entry& at(LandmarkId id) const { return per_landmark.at(static_cast<std::size_t>(id)); }
};

/// Synthetic population generator parameters. The template bone geometry is
/// deformed by `shape_modes` statistical modes with geometrically decaying
/// scales plus independent per-landmark jitter; skin points are placed along
/// the template outward direction perturbed by a small random rotation, at a
/// thickness drawn from the template's per-landmark normal truncated to
/// (0.5, 40) mm.
struct GeneratorSpec {
  int subject_count = 0;
  LandmarkSet landmark_set = LandmarkSet::kSetA;
  int shape_modes = 10;
  double shape_scale_mm = 4.0;
  double shape_decay = 0.8;
  double jitter_mm = 0.6;
  double direction_jitter_deg = 14.0;
  double thickness_min_mm = 0.5;
  double thickness_max_mm = 40.0;
};

struct FilterCriteria {
  std::vector<LandmarkId> required;
  double min_fstt_mm = 0.0;   // exclusive
  double max_fstt_mm = 60.0;  // exclusive
  double mad_k = 5.0;
};

struct RejectionReport {
  struct Item {
    std::string subject_id;
    std::string reason;
  };
  std::vector<Item> items;
};

/// Provenance and frame information stored in the dataset sidecar.
struct PopulationMeta {
  Frame frame = Frame::kDataset;
  std::string provenance;
  std::uint64_t seed = 0;
  int subject_count = 0;
};

/// Read a dataset CSV (one row per subject/landmark pair). Missing rows mark
/// landmarks as not present. Throws SchemaError / UnknownLandmark.
Population load_population(const std::string& path,
                           std::shared_ptr<const LandmarkRegistry> registry);

/// Write the dataset CSV plus a `<path>.meta.json` sidecar.
void save_population(const Population& pop, const std::string& path, const PopulationMeta& meta);

/// Remove subjects failing the criteria: required landmarks not fully
/// present, soft-tissue thickness outside (min, max) mm, or thickness more
/// than mad_k median-absolute-deviations from the landmark's population
/// median. The MAD gate iterates to a fixed point, which makes filtering
/// idempotent. Throws EmptyResult when nothing survives.
std::pair<Population, RejectionReport> filter_subjects(const Population& pop,
                                                       const FilterCriteria& criteria);

/// Deterministic synthetic population; identical (spec, seed) pairs produce
/// bit-identical populations.
Population generate_population(const GeneratorSpec& spec, std::uint64_t seed,
                               std::shared_ptr<const LandmarkRegistry> registry = nullptr);

/// Per-subject PCA alignment into the common frame (bone landmarks drive the
/// frame; skin is carried rigidly). Returns the aligned population and the
/// per-subject dataset-to-aligned transforms.
std::pair<Population, std::vector<AlignmentTransform>> pca_align(const Population& pop);

/// Per-landmark thickness/direction means over an aligned population.
/// Landmarks in `required` (when given) must have at least two present
/// subjects, otherwise InsufficientSamples is thrown.
PopulationStats compute_stats(const Population& pop,
                              const std::vector<LandmarkId>& required = {});

}  // namespace cfsim

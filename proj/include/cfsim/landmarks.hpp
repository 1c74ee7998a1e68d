#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cfsim/geometry.hpp"

namespace cfsim {

using LandmarkId = int;

enum class Laterality { kMidline, kLeft, kRight };

std::string to_string(Laterality lat);
Laterality laterality_from_string(const std::string& s);

struct LandmarkDef {
  LandmarkId id = -1;
  std::string name;
  Laterality laterality = Laterality::kMidline;
};

/// The two experiment landmark sets.
enum class LandmarkSet { kSetA, kSetB };

std::string to_string(LandmarkSet set);
LandmarkSet landmark_set_from_string(const std::string& s);

/// Registry of anatomical landmarks plus the shipped soft-tissue template:
/// per landmark a template bone coordinate, an outward unit direction, and
/// the population soft-tissue thickness parameters (mean, sd) in mm.
class LandmarkRegistry {
public:
  /// Parse a versioned template file (see data/fstt_template_v1.txt).
  static LandmarkRegistry parse(const std::string& text);
  static LandmarkRegistry load_file(const std::string& path);

  /// Registry built from the template embedded at compile time.
  static const LandmarkRegistry& builtin();

  std::size_t size() const { return defs_.size(); }
  const LandmarkDef& def(LandmarkId id) const { return defs_.at(id); }
  const std::vector<LandmarkDef>& defs() const { return defs_; }

  bool has(const std::string& name) const { return by_name_.count(name) > 0; }
  /// Throws UnknownLandmark for names outside the registry.
  LandmarkId id_of(const std::string& name) const;
  const std::string& name_of(LandmarkId id) const { return defs_.at(id).name; }

  const Point3& template_bone(LandmarkId id) const { return bone_.at(id); }
  const Point3& outward(LandmarkId id) const { return outward_.at(id); }
  double fstt_mean(LandmarkId id) const { return fstt_mean_.at(id); }
  double fstt_sd(LandmarkId id) const { return fstt_sd_.at(id); }

  /// Id of the mirror-side landmark; the id itself for midline entries.
  LandmarkId mirror_of(LandmarkId id) const { return mirror_.at(id); }

  /// Landmark ids of one of the experiment sets, in registry order.
  std::vector<LandmarkId> set_ids(LandmarkSet set) const;

  /// Ids of all midline landmarks in a given id list.
  std::vector<LandmarkId> midline_ids(const std::vector<LandmarkId>& ids) const;

  int version() const { return version_; }

private:
  int version_ = 0;
  std::vector<LandmarkDef> defs_;
  std::vector<Point3> bone_;
  std::vector<Point3> outward_;
  std::vector<double> fstt_mean_;
  std::vector<double> fstt_sd_;
  std::vector<LandmarkId> mirror_;
  std::unordered_map<std::string, LandmarkId> by_name_;
};

/// Text of the template embedded at build time from data/fstt_template_v1.txt.
const char* builtin_template_text();

/// Names of the E1-E3 and E4 landmark sets (29 each).
const std::vector<std::string>& set_a_names();
const std::vector<std::string>& set_b_names();

}  // namespace cfsim

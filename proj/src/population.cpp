#include "cfsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfsim/errors.hpp"

namespace cfsim {

namespace {

constexpr const char* kCsvHeader =
    "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present";

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real_field(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    if (!std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("line " + std::to_string(line_no) + ": cannot parse " + what + " from '" +
                      s + "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Eigen::Matrix3d rotation_from_rotvec(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  Eigen::Matrix3d k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-12) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

}  // namespace

Population load_population(const std::string& path,
                           std::shared_ptr<const LandmarkRegistry> registry) {
  if (!registry) throw InvalidSpec("load_population requires a registry");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");

  Population pop;
  pop.registry = registry;
  pop.frame = Frame::kDataset;

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("dataset '" + path + "' is empty");
  if (line != kCsvHeader) {
    throw SchemaError("dataset header mismatch; expected '" + std::string(kCsvHeader) + "'");
  }

  std::unordered_map<std::string, std::size_t> subject_index;
  std::vector<std::vector<bool>> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected 11 fields, got " +
                        std::to_string(f.size()));
    }
    const std::string& sid = f[0];
    if (sid.empty()) throw SchemaError("line " + std::to_string(line_no) + ": empty subject_id");

    auto it = subject_index.find(sid);
    if (it == subject_index.end()) {
      SubjectRecord rec;
      rec.subject_id = sid;
      if (f[1] == "M") {
        rec.sex = Sex::kMale;
      } else if (f[1] == "F") {
        rec.sex = Sex::kFemale;
      } else {
        throw SchemaError("line " + std::to_string(line_no) + ": sex must be M or F, got '" +
                          f[1] + "'");
      }
      rec.age = static_cast<int>(parse_real_field(f[2], "age", line_no));
      rec.landmarks.assign(registry->size(), LandmarkSample{});
      it = subject_index.emplace(sid, pop.subjects.size()).first;
      pop.subjects.push_back(std::move(rec));
      seen.emplace_back(registry->size(), false);
    }
    SubjectRecord& rec = pop.subjects[it->second];

    const LandmarkId lid = registry->id_of(f[3]);
    if (seen[it->second][static_cast<std::size_t>(lid)]) {
      throw SchemaError("line " + std::to_string(line_no) + ": duplicate row for subject '" + sid +
                        "' landmark '" + f[3] + "'");
    }
    seen[it->second][static_cast<std::size_t>(lid)] = true;

    LandmarkSample& sample = rec.landmarks[static_cast<std::size_t>(lid)];
    if (f[10] == "1") {
      sample.present = true;
      sample.bone = Point3(parse_real_field(f[4], "bone_x", line_no),
                           parse_real_field(f[5], "bone_y", line_no),
                           parse_real_field(f[6], "bone_z", line_no));
      sample.skin = Point3(parse_real_field(f[7], "skin_x", line_no),
                           parse_real_field(f[8], "skin_y", line_no),
                           parse_real_field(f[9], "skin_z", line_no));
    } else if (f[10] == "0") {
      sample.present = false;
    } else {
      throw SchemaError("line " + std::to_string(line_no) + ": present flag must be 0 or 1");
    }
  }

  // Frame from the sidecar when available.
  std::ifstream meta_in(path + ".meta.json");
  if (meta_in) {
    try {
      nlohmann::json meta = nlohmann::json::parse(meta_in);
      if (meta.value("frame", "dataset") == std::string("aligned")) pop.frame = Frame::kAligned;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("corrupt sidecar for '" + path + "': " + e.what());
    }
  }
  return pop;
}

void save_population(const Population& pop, const std::string& path, const PopulationMeta& meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  out << kCsvHeader << "\n";
  for (const auto& rec : pop.subjects) {
    for (std::size_t lid = 0; lid < rec.landmarks.size(); ++lid) {
      const auto& sample = rec.landmarks[lid];
      if (!sample.present) continue;
      out << rec.subject_id << ',' << (rec.sex == Sex::kMale ? 'M' : 'F') << ',' << rec.age << ','
          << pop.registry->name_of(static_cast<LandmarkId>(lid)) << ','
          << format_real(sample.bone.x()) << ',' << format_real(sample.bone.y()) << ','
          << format_real(sample.bone.z()) << ',' << format_real(sample.skin.x()) << ','
          << format_real(sample.skin.y()) << ',' << format_real(sample.skin.z()) << ",1\n";
    }
  }
  out.flush();
  if (!out) throw IoError("failed while writing dataset '" + path + "'");

  nlohmann::json j;
  j["schema_version"] = 1;
  j["frame"] = pop.frame == Frame::kAligned ? "aligned" : "dataset";
  j["provenance"] = meta.provenance;
  j["seed"] = meta.seed;
  j["subject_count"] = pop.subjects.size();
  std::ofstream meta_out(path + ".meta.json");
  if (!meta_out) throw IoError("cannot write sidecar for '" + path + "'");
  meta_out << j.dump(2) << "\n";
}

std::pair<Population, RejectionReport> filter_subjects(const Population& pop,
                                                       const FilterCriteria& criteria) {
  if (pop.subjects.empty()) throw InvalidSpec("filter_subjects: population is empty");

  RejectionReport report;
  std::vector<const SubjectRecord*> survivors;
  survivors.reserve(pop.subjects.size());

  // Static gates: required presence and the thickness validity window.
  for (const auto& rec : pop.subjects) {
    std::string reason;
    for (LandmarkId lid : criteria.required) {
      if (!rec.has(lid)) {
        reason = "required landmark '" + pop.registry->name_of(lid) + "' not present";
        break;
      }
      const double t = rec.thickness(lid);
      if (!(t > criteria.min_fstt_mm) || !(t < criteria.max_fstt_mm)) {
        std::ostringstream os;
        os << "fstt " << t << " mm at '" << pop.registry->name_of(lid) << "' outside ("
           << criteria.min_fstt_mm << ", " << criteria.max_fstt_mm << ") mm";
        reason = os.str();
        break;
      }
    }
    if (reason.empty()) {
      survivors.push_back(&rec);
    } else {
      report.items.push_back({rec.subject_id, reason});
    }
  }

  // MAD outlier gate, iterated to a fixed point so the filter is idempotent.
  // Below 8 survivors the median spread cannot be estimated usefully and the
  // gate is skipped.
  constexpr std::size_t kMinMadSample = 8;
  bool changed = true;
  while (changed && survivors.size() >= kMinMadSample) {
    changed = false;
    std::vector<double> medians(criteria.required.size());
    std::vector<double> mads(criteria.required.size());
    for (std::size_t k = 0; k < criteria.required.size(); ++k) {
      std::vector<double> values;
      values.reserve(survivors.size());
      for (const auto* rec : survivors) values.push_back(rec->thickness(criteria.required[k]));
      medians[k] = median_of(values);
      std::vector<double> devs;
      devs.reserve(values.size());
      for (double v : values) devs.push_back(std::abs(v - medians[k]));
      // Normalized MAD (1.4826 * raw) so k is in sigma-equivalent units.
      mads[k] = 1.4826 * median_of(std::move(devs));
    }
    std::vector<const SubjectRecord*> kept;
    kept.reserve(survivors.size());
    for (const auto* rec : survivors) {
      std::string reason;
      for (std::size_t k = 0; k < criteria.required.size(); ++k) {
        const double t = rec->thickness(criteria.required[k]);
        if (std::abs(t - medians[k]) > criteria.mad_k * mads[k]) {
          std::ostringstream os;
          os << "fstt " << t << " mm at '" << pop.registry->name_of(criteria.required[k])
             << "' deviates more than " << criteria.mad_k << " MAD from median " << medians[k]
             << " mm";
          reason = os.str();
          break;
        }
      }
      if (reason.empty()) {
        kept.push_back(rec);
      } else {
        report.items.push_back({rec->subject_id, reason});
        changed = true;
      }
    }
    survivors.swap(kept);
  }

  if (survivors.empty()) {
    throw EmptyResult("all " + std::to_string(pop.subjects.size()) + " subjects rejected");
  }

  Population out;
  out.registry = pop.registry;
  out.frame = pop.frame;
  out.subjects.reserve(survivors.size());
  for (const auto* rec : survivors) out.subjects.push_back(*rec);
  return {std::move(out), std::move(report)};
}

Population generate_population(const GeneratorSpec& spec, std::uint64_t seed,
                               std::shared_ptr<const LandmarkRegistry> registry) {
  if (spec.subject_count <= 0) {
    throw InvalidSpec("generator subject_count must be positive, got " +
                      std::to_string(spec.subject_count));
  }
  if (spec.shape_modes < 0 || spec.shape_scale_mm < 0.0 || spec.jitter_mm < 0.0 ||
      spec.direction_jitter_deg < 0.0) {
    throw InvalidSpec("generator scales must be non-negative");
  }
  if (!registry) {
    registry = std::shared_ptr<const LandmarkRegistry>(&LandmarkRegistry::builtin(),
                                                       [](const LandmarkRegistry*) {});
  }
  const std::vector<LandmarkId> ids = registry->set_ids(spec.landmark_set);

  CounterRng root{CounterRng::mix(seed ^ 0xCF51D0C5ULL)};

  // Shape modes: unit-RMS random displacement fields, fixed per template.
  std::vector<std::vector<Point3>> modes(static_cast<std::size_t>(spec.shape_modes));
  for (int m = 0; m < spec.shape_modes; ++m) {
    CounterRng rng = root.stream(1, static_cast<std::uint64_t>(m));
    auto& mode = modes[static_cast<std::size_t>(m)];
    mode.resize(ids.size());
    double sum_sq = 0.0;
    for (auto& d : mode) {
      d = Point3(rng.normal(), rng.normal(), rng.normal());
      sum_sq += d.squaredNorm();
    }
    const double rms = std::sqrt(sum_sq / static_cast<double>(ids.size()));
    for (auto& d : mode) d /= rms;
  }

  Population pop;
  pop.registry = registry;
  pop.frame = Frame::kDataset;
  pop.subjects.resize(static_cast<std::size_t>(spec.subject_count));

  const double dir_jitter_rad = spec.direction_jitter_deg * 0.017453292519943295;
  for (int i = 0; i < spec.subject_count; ++i) {
    SubjectRecord& rec = pop.subjects[static_cast<std::size_t>(i)];
    char sid[16];
    std::snprintf(sid, sizeof(sid), "S%04d", i);
    rec.subject_id = sid;

    CounterRng meta = root.stream(2, static_cast<std::uint64_t>(i));
    rec.sex = meta.uniform() < 0.53 ? Sex::kMale : Sex::kFemale;
    rec.age = static_cast<int>(meta.uniform_int(18, 96));
    rec.landmarks.assign(registry->size(), LandmarkSample{});

    CounterRng shape = root.stream(3, static_cast<std::uint64_t>(i));
    std::vector<double> coeffs(static_cast<std::size_t>(spec.shape_modes));
    double scale = spec.shape_scale_mm;
    for (auto& c : coeffs) {
      c = shape.normal(0.0, scale);
      scale *= spec.shape_decay;
    }

    CounterRng tissue = root.stream(4, static_cast<std::uint64_t>(i));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const LandmarkId lid = ids[k];
      LandmarkSample& sample = rec.landmarks[static_cast<std::size_t>(lid)];
      sample.present = true;
      sample.bone = registry->template_bone(lid);
      for (std::size_t m = 0; m < coeffs.size(); ++m) sample.bone += coeffs[m] * modes[m][k];
      sample.bone += Point3(shape.normal(0.0, spec.jitter_mm), shape.normal(0.0, spec.jitter_mm),
                            shape.normal(0.0, spec.jitter_mm));

      const double t = tissue.truncated_normal(registry->fstt_mean(lid), registry->fstt_sd(lid),
                                               spec.thickness_min_mm, spec.thickness_max_mm);
      const Eigen::Vector3d w(tissue.normal(0.0, dir_jitter_rad),
                              tissue.normal(0.0, dir_jitter_rad),
                              tissue.normal(0.0, dir_jitter_rad));
      const Point3 dir = rotation_from_rotvec(w) * registry->outward(lid);
      sample.skin = sample.bone + t * dir;
    }
  }
  return pop;
}

std::pair<Population, std::vector<AlignmentTransform>> pca_align(const Population& pop) {
  Population out;
  out.registry = pop.registry;
  out.frame = Frame::kAligned;
  out.subjects = pop.subjects;
  std::vector<AlignmentTransform> transforms;
  transforms.reserve(pop.subjects.size());

  for (auto& rec : out.subjects) {
    std::vector<Point3> bone;
    std::vector<Point3> midline;
    for (std::size_t lid = 0; lid < rec.landmarks.size(); ++lid) {
      if (!rec.landmarks[lid].present) continue;
      bone.push_back(rec.landmarks[lid].bone);
      if (pop.registry->def(static_cast<LandmarkId>(lid)).laterality == Laterality::kMidline) {
        midline.push_back(rec.landmarks[lid].bone);
      }
    }
    AlignmentTransform transform;
    try {
      transform = compute_principal_frame(bone, midline);
    } catch (const DegenerateCloud& e) {
      throw DegenerateCloud("subject '" + rec.subject_id + "': " + e.what());
    }
    for (auto& sample : rec.landmarks) {
      if (!sample.present) continue;
      sample.bone = transform.apply(sample.bone);
      sample.skin = transform.apply(sample.skin);
    }
    transforms.push_back(transform);
  }
  return {std::move(out), std::move(transforms)};
}

PopulationStats compute_stats(const Population& pop, const std::vector<LandmarkId>& required) {
  if (pop.frame != Frame::kAligned) {
    throw Error("compute_stats requires an aligned population");
  }
  PopulationStats stats;
  stats.per_landmark.assign(pop.registry->size(), PopulationStats::Entry{});

  for (std::size_t lid = 0; lid < pop.registry->size(); ++lid) {
    double thickness_sum = 0.0;
    Point3 dir_sum = Point3::Zero();
    int count = 0;
    for (const auto& rec : pop.subjects) {
      const auto& sample = rec.landmarks[lid];
      if (!sample.present) continue;
      const Point3 v = sample.skin - sample.bone;
      const double t = v.norm();
      if (!(t > 1e-12)) {
        throw Error("subject '" + rec.subject_id + "' has a zero soft-tissue vector at '" +
                    pop.registry->name_of(static_cast<LandmarkId>(lid)) +
                    "'; filter the population first");
      }
      thickness_sum += t;
      dir_sum += v / t;
      ++count;
    }
    auto& entry = stats.per_landmark[lid];
    entry.sample_count = count;
    if (count >= 2) {
      entry.mean_thickness = thickness_sum / count;
      const double norm = dir_sum.norm();
      if (!(norm > 1e-12)) {
        throw Error("mean direction at '" + pop.registry->name_of(static_cast<LandmarkId>(lid)) +
                    "' is undefined (directions cancel)");
      }
      entry.mean_direction = dir_sum / norm;
    }
  }

  for (LandmarkId lid : required) {
    if (stats.at(lid).sample_count < 2) {
      throw InsufficientSamples("landmark '" + pop.registry->name_of(lid) + "' has " +
                                std::to_string(stats.at(lid).sample_count) +
                                " present subjects; need at least 2");
    }
  }
  return stats;
}

}  // namespace cfsim

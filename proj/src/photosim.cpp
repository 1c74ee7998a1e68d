#include "cfsim/photosim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfsim/errors.hpp"

namespace cfsim {

namespace {

constexpr double kSpanFraction = 0.7;
constexpr double kDeg2Rad = 0.017453292519943295;

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(PoseClass pose) {
  return pose == PoseClass::kFrontal ? "frontal" : "lateral";
}

PoseClass pose_class_from_string(const std::string& s) {
  if (s == "frontal") return PoseClass::kFrontal;
  if (s == "lateral") return PoseClass::kLateral;
  throw ConfigError("unknown pose class '" + s + "'");
}

Eigen::Matrix3d pose_class_base(PoseClass pose) {
  if (pose == PoseClass::kFrontal) return Eigen::Matrix3d::Identity();
  return RigidPose::from_euler_deg(90.0, 0.0, 0.0).rotation;
}

std::vector<Point3> aligned_outward_normals(const LandmarkRegistry& registry,
                                            const std::vector<LandmarkId>& ids) {
  std::vector<Point3> bone;
  std::vector<Point3> midline;
  bone.reserve(ids.size());
  for (LandmarkId id : ids) {
    bone.push_back(registry.template_bone(id));
    if (registry.def(id).laterality == Laterality::kMidline) {
      midline.push_back(registry.template_bone(id));
    }
  }
  const AlignmentTransform frame = compute_principal_frame(bone, midline);
  std::vector<Point3> normals;
  normals.reserve(ids.size());
  for (LandmarkId id : ids) normals.push_back(frame.rotation * registry.outward(id));
  return normals;
}

PhotoSpec sample_spec(PoseClass pose_class, double noise_px, std::uint64_t seed,
                      const PhotoRanges& ranges) {
  CounterRng rng{seed};
  PhotoSpec spec;
  spec.pose_class = pose_class;
  spec.yaw_deg = rng.uniform(-ranges.rotation_max_deg, ranges.rotation_max_deg);
  spec.pitch_deg = rng.uniform(-ranges.rotation_max_deg, ranges.rotation_max_deg);
  spec.roll_deg = rng.uniform(-ranges.rotation_max_deg, ranges.rotation_max_deg);
  spec.focal = rng.uniform(ranges.focal_min, ranges.focal_max);
  spec.image_width = static_cast<int>(rng.uniform_int(ranges.width_min, ranges.width_max));
  spec.image_height = static_cast<int>(rng.uniform_int(ranges.height_min, ranges.height_max));
  spec.noise_px = noise_px;
  spec.rng_seed = seed;
  return spec;
}

SyntheticPhoto render(const RenderInput& input, const PhotoSpec& spec,
                      const VisibilityModel& visibility, const std::string& photo_id,
                      const std::string& subject_id) {
  const std::size_t n = input.ids.size();
  if (n != input.points.size() || n != input.normals.size()) {
    throw InvalidSpec("render input arrays disagree in length");
  }
  if (n < 4) throw TooFewVisible("render input has fewer than 4 landmarks");

  RigidPose pose;
  pose.rotation = RigidPose::from_euler_deg(spec.yaw_deg, spec.pitch_deg, spec.roll_deg).rotation *
                  pose_class_base(spec.pose_class);

  Point3 centroid = Point3::Zero();
  for (const Point3& p : input.points) centroid += p;
  centroid /= static_cast<double>(n);
  double radius = 0.0;
  for (const Point3& p : input.points) radius = std::max(radius, (p - centroid).norm());
  if (!(radius > 0.0)) throw InvalidSpec("render input landmarks coincide");

  CameraModel camera = CameraModel::centered(spec.focal, spec.image_width, spec.image_height);
  const double f_px = camera.focal_px();
  const double target_span =
      kSpanFraction * std::min(spec.image_width, spec.image_height);

  // Place the camera so the projected cloud spans the target and sits on the
  // principal point; the multiplicative distance update and the lateral
  // recentring both contract quickly.
  double distance = std::max(2.0 * radius * f_px / target_span, 1.5 * radius);
  pose.translation = Point3(0.0, 0.0, distance) - pose.rotation * centroid;
  for (int iter = 0; iter < 60; ++iter) {
    Point2 lo(1e300, 1e300), hi(-1e300, -1e300);
    double depth_sum = 0.0;
    for (const Point3& p : input.points) {
      const Point3 pc = pose.apply(p);
      if (!(pc.z() > kEpsilonDepth)) throw NumericalFailure("framing put a landmark behind the camera");
      const Point2 uv(camera.principal_point.x() + f_px * pc.x() / pc.z(),
                      camera.principal_point.y() + f_px * pc.y() / pc.z());
      lo = lo.cwiseMin(uv);
      hi = hi.cwiseMax(uv);
      depth_sum += pc.z();
    }
    const double span = (hi - lo).maxCoeff();
    const Point2 center_err = 0.5 * (lo + hi) - camera.principal_point;
    const double mean_depth = depth_sum / static_cast<double>(n);

    if (std::abs(span / target_span - 1.0) < 1e-9 && center_err.cwiseAbs().maxCoeff() < 1e-9) {
      break;
    }
    const double scale = span / target_span;
    const double new_distance = std::max(mean_depth * scale, 1.35 * radius) ;
    pose.translation.z() += new_distance - mean_depth;
    pose.translation.x() -= center_err.x() * new_distance / f_px;
    pose.translation.y() -= center_err.y() * new_distance / f_px;
  }

  // Geometric visibility: outward normal within the half-angle of the
  // direction toward the camera center.
  const Point3 cam_center = pose.camera_center();
  const double cos_threshold = std::cos(visibility.half_angle_deg * kDeg2Rad);
  std::vector<std::size_t> passing;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 to_cam = (cam_center - input.points[i]).normalized();
    if (input.normals[i].normalized().dot(to_cam) > cos_threshold) passing.push_back(i);
  }

  if (visibility.mode == VisibilityModel::Mode::kFixedCount &&
      static_cast<int>(passing.size()) > visibility.fixed_count) {
    // Uniform k-subset via partial Fisher-Yates on the passing indices.
    CounterRng rng = CounterRng{spec.rng_seed}.stream(11);
    for (int j = 0; j < visibility.fixed_count; ++j) {
      const auto pick = static_cast<std::size_t>(
          rng.uniform_int(j, static_cast<std::int64_t>(passing.size()) - 1));
      std::swap(passing[static_cast<std::size_t>(j)], passing[pick]);
    }
    passing.resize(static_cast<std::size_t>(visibility.fixed_count));
    std::sort(passing.begin(), passing.end());
  }

  if (passing.size() < 4) {
    throw TooFewVisible("only " + std::to_string(passing.size()) +
                        " landmarks visible; need at least 4");
  }

  SyntheticPhoto photo;
  photo.photo_id = photo_id;
  photo.subject_id = subject_id;
  photo.spec = spec;
  photo.ground_truth = PhotoGroundTruth{camera, pose};
  photo.observations.reserve(passing.size());
  for (std::size_t i : passing) {
    photo.observations.push_back({input.ids[i], project(camera, pose, input.points[i])});
  }
  std::sort(photo.observations.begin(), photo.observations.end(),
            [](const Observation& a, const Observation& b) { return a.id < b.id; });
  return photo;
}

SyntheticPhoto apply_noise(const SyntheticPhoto& photo, double noise_px, std::uint64_t seed) {
  if (noise_px < 0.0) throw InvalidSpec("noise_px must be non-negative");
  if (noise_px == 0.0) return photo;
  SyntheticPhoto noisy = photo;
  CounterRng rng{seed};
  for (auto& obs : noisy.observations) {
    obs.uv.x() += rng.uniform(-noise_px, noise_px);
    obs.uv.y() += rng.uniform(-noise_px, noise_px);
  }
  return noisy;
}

void save_photos(const std::vector<SyntheticPhoto>& photos, const LandmarkRegistry& registry,
                 const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write photo set '" + csv_path + "'");
  out << "photo_id,subject_id,landmark_name,u,v\n";
  for (const auto& photo : photos) {
    for (const auto& obs : photo.observations) {
      out << photo.photo_id << ',' << photo.subject_id << ',' << registry.name_of(obs.id) << ','
          << format_real(obs.uv.x()) << ',' << format_real(obs.uv.y()) << "\n";
    }
  }
  out.flush();
  if (!out) throw IoError("failed while writing photo set '" + csv_path + "'");

  nlohmann::json sidecar;
  sidecar["schema_version"] = 1;
  auto& list = sidecar["photos"];
  list = nlohmann::json::array();
  for (const auto& photo : photos) {
    nlohmann::json j;
    j["photo_id"] = photo.photo_id;
    j["subject_id"] = photo.subject_id;
    j["pose_class"] = to_string(photo.spec.pose_class);
    j["image_width"] = photo.spec.image_width;
    j["image_height"] = photo.spec.image_height;
    j["noise_px"] = photo.spec.noise_px;
    // Everything below is withheld from solver-facing paths.
    nlohmann::json eval;
    eval["yaw_deg"] = photo.spec.yaw_deg;
    eval["pitch_deg"] = photo.spec.pitch_deg;
    eval["roll_deg"] = photo.spec.roll_deg;
    eval["focal"] = photo.spec.focal;
    eval["rng_seed"] = photo.spec.rng_seed;
    const auto& gt = photo.ground_truth;
    eval["camera"] = {{"focal", gt.camera.focal},
                      {"principal_u", gt.camera.principal_point.x()},
                      {"principal_v", gt.camera.principal_point.y()}};
    const Eigen::Vector3d ypr = gt.pose.euler_deg();
    eval["pose"] = {{"yaw_deg", ypr.x()},
                    {"pitch_deg", ypr.y()},
                    {"roll_deg", ypr.z()},
                    {"tx", gt.pose.translation.x()},
                    {"ty", gt.pose.translation.y()},
                    {"tz", gt.pose.translation.z()}};
    j["evaluation_only"] = std::move(eval);
    list.push_back(std::move(j));
  }
  std::ofstream meta(csv_path + ".meta.json");
  if (!meta) throw IoError("cannot write photo sidecar for '" + csv_path + "'");
  meta << sidecar.dump(2) << "\n";
}

std::vector<SyntheticPhoto> load_photos(const std::string& csv_path,
                                        const LandmarkRegistry& registry) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open photo set '" + csv_path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "photo_id,subject_id,landmark_name,u,v") {
    throw SchemaError("photo set header mismatch in '" + csv_path + "'");
  }

  std::vector<SyntheticPhoto> photos;
  std::unordered_map<std::string, std::size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (f.size() != 5) {
      throw SchemaError("photo set line " + std::to_string(line_no) + ": expected 5 fields");
    }
    auto it = index.find(f[0]);
    if (it == index.end()) {
      SyntheticPhoto photo;
      photo.photo_id = f[0];
      photo.subject_id = f[1];
      it = index.emplace(f[0], photos.size()).first;
      photos.push_back(std::move(photo));
    }
    Observation obs;
    obs.id = registry.id_of(f[2]);
    try {
      obs.uv = Point2(std::stod(f[3]), std::stod(f[4]));
    } catch (const std::exception&) {
      throw SchemaError("photo set line " + std::to_string(line_no) + ": bad coordinates");
    }
    photos[it->second].observations.push_back(obs);
  }
  for (auto& photo : photos) {
    std::sort(photo.observations.begin(), photo.observations.end(),
              [](const Observation& a, const Observation& b) { return a.id < b.id; });
  }

  std::ifstream meta(csv_path + ".meta.json");
  if (meta) {
    nlohmann::json sidecar = nlohmann::json::parse(meta, nullptr, true);
    std::unordered_map<std::string, const nlohmann::json*> by_id;
    for (const auto& j : sidecar.at("photos")) {
      by_id.emplace(j.at("photo_id").get<std::string>(), &j);
    }
    for (auto& photo : photos) {
      const auto it = by_id.find(photo.photo_id);
      if (it == by_id.end()) continue;
      const nlohmann::json& j = *it->second;
      photo.spec.pose_class = pose_class_from_string(j.at("pose_class").get<std::string>());
      photo.spec.image_width = j.at("image_width").get<int>();
      photo.spec.image_height = j.at("image_height").get<int>();
      photo.spec.noise_px = j.at("noise_px").get<double>();
      if (j.contains("evaluation_only")) {
        const auto& eval = j.at("evaluation_only");
        photo.spec.yaw_deg = eval.at("yaw_deg").get<double>();
        photo.spec.pitch_deg = eval.at("pitch_deg").get<double>();
        photo.spec.roll_deg = eval.at("roll_deg").get<double>();
        photo.spec.focal = eval.at("focal").get<double>();
        photo.spec.rng_seed = eval.at("rng_seed").get<std::uint64_t>();
        photo.ground_truth.camera =
            CameraModel::centered(eval.at("camera").at("focal").get<double>(),
                                  photo.spec.image_width, photo.spec.image_height);
        const auto& p = eval.at("pose");
        photo.ground_truth.pose = RigidPose::from_euler_deg(
            p.at("yaw_deg").get<double>(), p.at("pitch_deg").get<double>(),
            p.at("roll_deg").get<double>(),
            Eigen::Vector3d(p.at("tx").get<double>(), p.at("ty").get<double>(),
                            p.at("tz").get<double>()));
      }
    }
  }
  return photos;
}

}  // namespace cfsim

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "cfsim/errors.hpp"
#include "cfsim/photosim.hpp"
#include "cfsim/population.hpp"
#include "support/oracles.hpp"

using namespace cfsim;

namespace {

/// Render input straight from the template geometry (skin = bone + mu * out).
RenderInput template_input(LandmarkSet set) {
  const LandmarkRegistry& reg = LandmarkRegistry::builtin();
  const auto ids = reg.set_ids(set);
  const auto normals = aligned_outward_normals(reg, ids);

  std::vector<Point3> bone;
  std::vector<Point3> midline;
  for (LandmarkId id : ids) {
    bone.push_back(reg.template_bone(id));
    if (reg.def(id).laterality == Laterality::kMidline) midline.push_back(reg.template_bone(id));
  }
  const AlignmentTransform frame = compute_principal_frame(bone, midline);

  RenderInput input;
  input.ids = ids;
  input.normals = normals;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Point3 skin =
        reg.template_bone(ids[k]) + reg.fstt_mean(ids[k]) * reg.outward(ids[k]);
    input.points.push_back(frame.apply(skin));
  }
  return input;
}

PhotoSpec fixed_spec(PoseClass pose, double focal, int width, int height) {
  PhotoSpec spec;
  spec.pose_class = pose;
  spec.focal = focal;
  spec.image_width = width;
  spec.image_height = height;
  return spec;
}

}  // namespace

TEST_CASE("sample_spec: deterministic and in range") {
  const PhotoSpec a = sample_spec(PoseClass::kFrontal, 5.0, 1234);
  const PhotoSpec b = sample_spec(PoseClass::kFrontal, 5.0, 1234);
  CHECK(a.yaw_deg == b.yaw_deg);
  CHECK(a.pitch_deg == b.pitch_deg);
  CHECK(a.roll_deg == b.roll_deg);
  CHECK(a.focal == b.focal);
  CHECK(a.image_width == b.image_width);
  CHECK(a.image_height == b.image_height);

  for (int i = 0; i < 10000; ++i) {
    const PhotoSpec s = sample_spec(PoseClass::kLateral, 0.0, static_cast<std::uint64_t>(i));
    CHECK(s.focal >= 0.5);
    CHECK(s.focal <= 1.5);
    CHECK(std::abs(s.yaw_deg) <= 15.0);
    CHECK(std::abs(s.pitch_deg) <= 15.0);
    CHECK(std::abs(s.roll_deg) <= 15.0);
    CHECK(s.image_width >= 600);
    CHECK(s.image_width <= 1200);
    CHECK(s.image_height >= 600);
    CHECK(s.image_height <= 1000);
  }
}

TEST_CASE("sample_spec: focal and rotation draws pass a KS uniformity test") {
  std::vector<double> focals, yaws;
  for (int i = 0; i < 10000; ++i) {
    const PhotoSpec s = sample_spec(PoseClass::kFrontal, 0.0, 777000 + static_cast<std::uint64_t>(i));
    focals.push_back(s.focal);
    yaws.push_back(s.yaw_deg);
  }
  // Critical value at alpha = 0.01 for n = 10000: 1.628 / sqrt(n).
  const double critical = 1.628 / std::sqrt(10000.0);
  CHECK(cfsim::testing::ks_statistic_uniform(focals, 0.5, 1.5) < critical);
  CHECK(cfsim::testing::ks_statistic_uniform(yaws, -15.0, 15.0) < critical);
}

TEST_CASE("render: frontal zero-offset photo is mirror symmetric") {
  const RenderInput input = template_input(LandmarkSet::kSetA);
  const PhotoSpec spec = fixed_spec(PoseClass::kFrontal, 1.0, 1000, 800);
  const SyntheticPhoto photo = render(input, spec, VisibilityModel{}, "p0", "s0");
  REQUIRE(photo.observations.size() >= 4);

  const LandmarkRegistry& reg = LandmarkRegistry::builtin();
  const double cu = 500.0;
  for (const auto& obs : photo.observations) {
    const LandmarkId other = reg.mirror_of(obs.id);
    if (other == obs.id) {
      CHECK(std::abs(obs.uv.x() - cu) < 1e-6);  // midline on the vertical axis
      continue;
    }
    bool found = false;
    for (const auto& mirrored : photo.observations) {
      if (mirrored.id != other) continue;
      found = true;
      CHECK(std::abs((obs.uv.x() - cu) + (mirrored.uv.x() - cu)) < 1e-6);
      CHECK(std::abs(obs.uv.y() - mirrored.uv.y()) < 1e-6);
    }
    CHECK(found);
  }
}

TEST_CASE("render: ground-truth camera reprojects noiseless observations") {
  const RenderInput input = template_input(LandmarkSet::kSetA);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (PoseClass pose : {PoseClass::kFrontal, PoseClass::kLateral}) {
      const PhotoSpec spec = sample_spec(pose, 0.0, 555 + seed);
      const SyntheticPhoto photo = render(input, spec, VisibilityModel{}, "p", "s");
      for (const auto& obs : photo.observations) {
        const auto it = std::find(input.ids.begin(), input.ids.end(), obs.id);
        REQUIRE(it != input.ids.end());
        const Point3 p = input.points[static_cast<std::size_t>(it - input.ids.begin())];
        const Point2 uv = project(photo.ground_truth.camera, photo.ground_truth.pose, p);
        CHECK((uv - obs.uv).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }
}

TEST_CASE("render: observations stay inside the image bounds") {
  const RenderInput input = template_input(LandmarkSet::kSetB);
  for (std::uint64_t seed = 100; seed < 400; ++seed) {
    const PoseClass pose = seed % 2 == 0 ? PoseClass::kFrontal : PoseClass::kLateral;
    const PhotoSpec spec = sample_spec(pose, 0.0, seed);
    const SyntheticPhoto photo = render(input, spec, VisibilityModel{}, "p", "s");
    for (const auto& obs : photo.observations) {
      CHECK(obs.uv.x() >= 0.0);
      CHECK(obs.uv.x() <= spec.image_width);
      CHECK(obs.uv.y() >= 0.0);
      CHECK(obs.uv.y() <= spec.image_height);
    }
  }
}

TEST_CASE("render: visible counts sit in the frontal and lateral bands") {
  GeneratorSpec gen;
  gen.subject_count = 100;
  const Population pop = generate_population(gen, 2025);
  const Population aligned = pca_align(pop).first;
  const auto ids = pop.registry->set_ids(LandmarkSet::kSetA);
  const auto normals = aligned_outward_normals(*pop.registry, ids);

  double frontal_sum = 0.0, lateral_sum = 0.0;
  int frontal_n = 0, lateral_n = 0;
  CounterRng seeds{909};
  for (const auto& rec : aligned.subjects) {
    RenderInput input;
    input.ids = ids;
    input.normals = normals;
    for (LandmarkId lid : ids) input.points.push_back(rec.at(lid).skin);
    for (PoseClass pose : {PoseClass::kFrontal, PoseClass::kLateral}) {
      for (int rep = 0; rep < 3; ++rep) {
        const PhotoSpec spec = sample_spec(pose, 0.0, seeds.next_u64());
        const SyntheticPhoto photo = render(input, spec, VisibilityModel{}, "p", rec.subject_id);
        if (pose == PoseClass::kFrontal) {
          frontal_sum += static_cast<double>(photo.observations.size());
          ++frontal_n;
        } else {
          lateral_sum += static_cast<double>(photo.observations.size());
          ++lateral_n;
        }
      }
    }
  }
  const double frontal_mean = frontal_sum / frontal_n;
  const double lateral_mean = lateral_sum / lateral_n;
  MESSAGE("frontal mean visible: ", frontal_mean, ", lateral mean visible: ", lateral_mean);
  CHECK(frontal_mean >= 18.0);
  CHECK(frontal_mean <= 28.0);
  CHECK(lateral_mean >= 6.0);
  CHECK(lateral_mean <= 14.0);
}

TEST_CASE("render: fixed-count visibility yields exactly k observations") {
  const RenderInput input = template_input(LandmarkSet::kSetB);
  VisibilityModel vis;
  vis.mode = VisibilityModel::Mode::kFixedCount;
  for (int k : {8, 10, 12, 14, 16}) {
    vis.fixed_count = k;
    PhotoSpec spec = sample_spec(PoseClass::kFrontal, 0.0, 4000 + static_cast<std::uint64_t>(k));
    const SyntheticPhoto photo = render(input, spec, vis, "p", "s");
    CHECK(static_cast<int>(photo.observations.size()) == k);
    // Deterministic subset for a fixed spec seed.
    const SyntheticPhoto again = render(input, spec, vis, "p", "s");
    REQUIRE(again.observations.size() == photo.observations.size());
    for (std::size_t i = 0; i < photo.observations.size(); ++i) {
      CHECK(again.observations[i].id == photo.observations[i].id);
    }
  }
}

TEST_CASE("render: too few visible landmarks raises") {
  RenderInput input = template_input(LandmarkSet::kSetA);
  input.ids.resize(3);
  input.points.resize(3);
  input.normals.resize(3);
  const PhotoSpec spec = fixed_spec(PoseClass::kFrontal, 1.0, 800, 800);
  CHECK_THROWS_AS(render(input, spec, VisibilityModel{}, "p", "s"), TooFewVisible);

  // All normals pointing away from the camera: nothing passes the filter.
  RenderInput away = template_input(LandmarkSet::kSetA);
  for (auto& n : away.normals) n = -n;
  CHECK_THROWS_AS(render(away, spec, VisibilityModel{}, "p", "s"), TooFewVisible);
}

TEST_CASE("apply_noise: identity at zero, bounded at five, deterministic") {
  const RenderInput input = template_input(LandmarkSet::kSetA);
  const PhotoSpec spec = sample_spec(PoseClass::kFrontal, 0.0, 31);
  const SyntheticPhoto photo = render(input, spec, VisibilityModel{}, "p", "s");

  const SyntheticPhoto same = apply_noise(photo, 0.0, 99);
  for (std::size_t i = 0; i < photo.observations.size(); ++i) {
    CHECK(same.observations[i].uv.x() == photo.observations[i].uv.x());
    CHECK(same.observations[i].uv.y() == photo.observations[i].uv.y());
  }

  const SyntheticPhoto noisy = apply_noise(photo, 5.0, 99);
  const SyntheticPhoto noisy2 = apply_noise(photo, 5.0, 99);
  for (std::size_t i = 0; i < photo.observations.size(); ++i) {
    CHECK(std::abs(noisy.observations[i].uv.x() - photo.observations[i].uv.x()) <= 5.0);
    CHECK(std::abs(noisy.observations[i].uv.y() - photo.observations[i].uv.y()) <= 5.0);
    CHECK(noisy.observations[i].uv.x() == noisy2.observations[i].uv.x());
    CHECK(noisy.observations[i].uv.y() == noisy2.observations[i].uv.y());
  }
}

TEST_CASE("photo set: save and load round trip") {
  const RenderInput input = template_input(LandmarkSet::kSetA);
  std::vector<SyntheticPhoto> photos;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PoseClass pose = seed % 2 == 0 ? PoseClass::kFrontal : PoseClass::kLateral;
    photos.push_back(render(input, sample_spec(pose, 0.0, 600 + seed), VisibilityModel{},
                            "ph" + std::to_string(seed), "subj"));
  }
  const std::string path =
      (std::filesystem::temp_directory_path() / "cfsim_photos_test.csv").string();
  save_photos(photos, LandmarkRegistry::builtin(), path);
  const auto loaded = load_photos(path, LandmarkRegistry::builtin());
  REQUIRE(loaded.size() == photos.size());
  for (std::size_t i = 0; i < photos.size(); ++i) {
    CHECK(loaded[i].photo_id == photos[i].photo_id);
    CHECK(loaded[i].subject_id == photos[i].subject_id);
    CHECK(loaded[i].spec.pose_class == photos[i].spec.pose_class);
    CHECK(loaded[i].spec.focal == doctest::Approx(photos[i].spec.focal).epsilon(1e-15));
    REQUIRE(loaded[i].observations.size() == photos[i].observations.size());
    for (std::size_t k = 0; k < photos[i].observations.size(); ++k) {
      CHECK(loaded[i].observations[k].id == photos[i].observations[k].id);
      CHECK((loaded[i].observations[k].uv - photos[i].observations[k].uv).cwiseAbs().maxCoeff() <
            1e-12);
    }
    const Point2 gt_check =
        project(loaded[i].ground_truth.camera, loaded[i].ground_truth.pose,
                input.points[5]);
    const Point2 gt_ref =
        project(photos[i].ground_truth.camera, photos[i].ground_truth.pose, input.points[5]);
    CHECK((gt_check - gt_ref).cwiseAbs().maxCoeff() < 1e-6);
  }
}

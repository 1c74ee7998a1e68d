#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cfsim/errors.hpp"
#include "cfsim/fstt.hpp"

using namespace cfsim;

namespace {

struct Fixture {
  Population aligned;
  PopulationStats stats;
  std::vector<LandmarkId> ids;
};

Fixture make_fixture(int subjects, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.subject_count = subjects;
  Fixture f;
  const Population pop = generate_population(spec, seed);
  f.aligned = pca_align(pop).first;
  f.ids = pop.registry->set_ids(spec.landmark_set);
  f.stats = compute_stats(f.aligned, f.ids);
  return f;
}

}  // namespace

TEST_CASE("predict (real, real) reproduces the true skin points") {
  const Fixture f = make_fixture(5, 21);
  for (const auto& rec : f.aligned.subjects) {
    const CephPrediction pred = predict(rec, FsttConfig{}, nullptr, f.ids);
    for (std::size_t k = 0; k < pred.ids.size(); ++k) {
      CHECK((pred.points[k] - rec.at(pred.ids[k]).skin).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("predict with thickness none collapses onto the bone") {
  const Fixture f = make_fixture(3, 22);
  FsttConfig config;
  config.thickness_mode = ThicknessMode::kNone;
  for (const auto& rec : f.aligned.subjects) {
    const CephPrediction pred = predict(rec, config, nullptr, f.ids);
    for (std::size_t k = 0; k < pred.ids.size(); ++k) {
      CHECK((pred.points[k] - rec.at(pred.ids[k]).bone).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("predict (mean, mean) on an identical population recovers the skin") {
  GeneratorSpec spec;
  spec.subject_count = 1;
  Population pop = generate_population(spec, 23);
  for (int i = 0; i < 3; ++i) {
    SubjectRecord rec = pop.subjects[0];
    rec.subject_id = "C" + std::to_string(i);
    pop.subjects.push_back(rec);
  }
  const Population aligned = pca_align(pop).first;
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  const PopulationStats stats = compute_stats(aligned, ids);

  FsttConfig config;
  config.thickness_mode = ThicknessMode::kMean;
  config.direction_mode = DirectionMode::kMean;
  const CephPrediction pred = predict(aligned.subjects[0], config, &stats, ids);
  for (std::size_t k = 0; k < pred.ids.size(); ++k) {
    CHECK((pred.points[k] - aligned.subjects[0].at(pred.ids[k]).skin).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("predicted offset length equals the configured thickness") {
  const Fixture f = make_fixture(10, 24);
  for (const FsttConfig config : {FsttConfig{ThicknessMode::kReal, DirectionMode::kReal},
                                  FsttConfig{ThicknessMode::kReal, DirectionMode::kMean},
                                  FsttConfig{ThicknessMode::kMean, DirectionMode::kReal},
                                  FsttConfig{ThicknessMode::kMean, DirectionMode::kMean}}) {
    for (const auto& rec : f.aligned.subjects) {
      const CephPrediction pred = predict(rec, config, &f.stats, f.ids);
      for (std::size_t k = 0; k < pred.ids.size(); ++k) {
        const LandmarkId lid = pred.ids[k];
        const double expected = config.thickness_mode == ThicknessMode::kReal
                                    ? rec.thickness(lid)
                                    : f.stats.at(lid).mean_thickness;
        CHECK((pred.points[k] - rec.at(lid).bone).norm() ==
              doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("prediction error bound under mean modes (triangle inequality)") {
  const Fixture f = make_fixture(30, 25);
  FsttConfig config;
  config.thickness_mode = ThicknessMode::kMean;
  config.direction_mode = DirectionMode::kMean;
  for (const auto& rec : f.aligned.subjects) {
    const CephPrediction pred = predict(rec, config, &f.stats, f.ids);
    for (std::size_t k = 0; k < pred.ids.size(); ++k) {
      const LandmarkId lid = pred.ids[k];
      const double err = (pred.points[k] - rec.at(lid).skin).norm();
      const double t_real = rec.thickness(lid);
      const double t_mean = f.stats.at(lid).mean_thickness;
      const Point3 d_real = (rec.at(lid).skin - rec.at(lid).bone).normalized();
      const Point3 d_mean = f.stats.at(lid).mean_direction;
      const double bound = std::abs(t_real - t_mean) + t_mean * (d_real - d_mean).norm();
      CHECK(err <= bound + 1e-9);
    }
  }
}

TEST_CASE("predict is deterministic") {
  const Fixture f = make_fixture(4, 26);
  FsttConfig config;
  config.thickness_mode = ThicknessMode::kMean;
  config.direction_mode = DirectionMode::kReal;
  const CephPrediction a = predict(f.aligned.subjects[2], config, &f.stats, f.ids);
  const CephPrediction b = predict(f.aligned.subjects[2], config, &f.stats, f.ids);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK((a.points[k] - b.points[k]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("predict error cases") {
  const Fixture f = make_fixture(4, 27);
  FsttConfig mean_config;
  mean_config.thickness_mode = ThicknessMode::kMean;
  CHECK_THROWS_AS(predict(f.aligned.subjects[0], mean_config, nullptr, f.ids), MissingStats);

  SubjectRecord rec = f.aligned.subjects[0];
  rec.landmarks[static_cast<std::size_t>(f.ids[4])].present = false;
  CHECK_THROWS_AS(predict(rec, FsttConfig{}, nullptr, f.ids), MissingLandmark);
}

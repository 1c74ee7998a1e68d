#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cfsim/errors.hpp"
#include "cfsim/population.hpp"
#include "support/oracles.hpp"

using namespace cfsim;

namespace {

std::shared_ptr<const LandmarkRegistry> builtin_registry() {
  return {&LandmarkRegistry::builtin(), [](const LandmarkRegistry*) {}};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

bool same_population(const Population& a, const Population& b, double tol) {
  if (a.subjects.size() != b.subjects.size()) return false;
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    const auto& ra = a.subjects[i];
    const auto& rb = b.subjects[i];
    if (ra.subject_id != rb.subject_id || ra.sex != rb.sex || ra.age != rb.age) return false;
    for (std::size_t l = 0; l < ra.landmarks.size(); ++l) {
      if (ra.landmarks[l].present != rb.landmarks[l].present) return false;
      if (!ra.landmarks[l].present) continue;
      if ((ra.landmarks[l].bone - rb.landmarks[l].bone).cwiseAbs().maxCoeff() > tol) return false;
      if ((ra.landmarks[l].skin - rb.landmarks[l].skin).cwiseAbs().maxCoeff() > tol) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("registry: 86 landmarks, unique names, paired sides, experiment sets") {
  const LandmarkRegistry& reg = LandmarkRegistry::builtin();
  CHECK(reg.size() == 86);

  std::set<std::string> names;
  int midline = 0;
  for (const auto& def : reg.defs()) {
    names.insert(def.name);
    if (def.laterality == Laterality::kMidline) {
      ++midline;
      CHECK(reg.mirror_of(def.id) == def.id);
    } else {
      const LandmarkId other = reg.mirror_of(def.id);
      CHECK(other != def.id);
      CHECK(reg.mirror_of(other) == def.id);
      CHECK(reg.def(other).laterality !=  def.laterality);
    }
  }
  CHECK(names.size() == 86);
  CHECK(midline == 12);

  CHECK(reg.set_ids(LandmarkSet::kSetA).size() == 29);
  CHECK(reg.set_ids(LandmarkSet::kSetB).size() == 29);
  CHECK(reg.midline_ids(reg.set_ids(LandmarkSet::kSetA)).size() == 3);
  CHECK(reg.midline_ids(reg.set_ids(LandmarkSet::kSetB)).size() == 5);

  CHECK_THROWS_AS(reg.id_of("Not A Landmark"), UnknownLandmark);
}

TEST_CASE("registry: shipped template file matches the embedded copy") {
  std::ifstream in(std::string(CFSIM_SOURCE_DIR) + "/data/fstt_template_v1.txt");
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == std::string(builtin_template_text()));
}

TEST_CASE("registry: template is mirror-symmetric across the midline plane") {
  const LandmarkRegistry& reg = LandmarkRegistry::builtin();
  for (const auto& def : reg.defs()) {
    const LandmarkId other = reg.mirror_of(def.id);
    const Point3 b = reg.template_bone(def.id);
    const Point3 mb = reg.template_bone(other);
    CHECK(b.x() == -mb.x());
    CHECK(b.y() == mb.y());
    CHECK(b.z() == mb.z());
    CHECK(reg.fstt_mean(def.id) == reg.fstt_mean(other));
  }
}

TEST_CASE("load: two-subject fixture with presence flags") {
  const std::string path = temp_path("cfsim_fixture_pop.csv");
  {
    std::ofstream out(path);
    out << "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present\n";
    out << "A,M,40,Glabella,0,42,96,0,45,101,1\n";
    out << "A,M,40,Nasion,0,33,93,0,36,98,1\n";
    out << "A,M,40,Rhinion,,,,,,,0\n";
    out << "B,F,62,Glabella,0.5,41,95,0.5,44,100,1\n";
  }
  const Population pop = load_population(path, builtin_registry());
  REQUIRE(pop.subjects.size() == 2);
  const LandmarkId glabella = pop.registry->id_of("Glabella");
  const LandmarkId nasion = pop.registry->id_of("Nasion");
  const LandmarkId rhinion = pop.registry->id_of("Rhinion");
  CHECK(pop.subjects[0].subject_id == "A");
  CHECK(pop.subjects[0].sex == Sex::kMale);
  CHECK(pop.subjects[0].age == 40);
  CHECK(pop.subjects[0].has(glabella));
  CHECK(pop.subjects[0].has(nasion));
  CHECK_FALSE(pop.subjects[0].has(rhinion));
  CHECK(pop.subjects[1].subject_id == "B");
  CHECK(pop.subjects[1].has(glabella));
  CHECK_FALSE(pop.subjects[1].has(nasion));
  CHECK(pop.subjects[0].at(glabella).skin.y() == 45.0);
}

TEST_CASE("load: unknown landmark and malformed rows raise") {
  const std::string path = temp_path("cfsim_bad_pop.csv");
  {
    std::ofstream out(path);
    out << "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present\n";
    out << "A,M,40,Totally Unknown,0,0,0,0,0,1,1\n";
  }
  CHECK_THROWS_AS(load_population(path, builtin_registry()), UnknownLandmark);
  {
    std::ofstream out(path);
    out << "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present\n";
    out << "A,M,40,Glabella,0,0\n";
  }
  CHECK_THROWS_AS(load_population(path, builtin_registry()), SchemaError);
  {
    std::ofstream out(path);
    out << "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present\n";
    out << "A,X,40,Glabella,0,0,0,0,0,1,1\n";
  }
  CHECK_THROWS_AS(load_population(path, builtin_registry()), SchemaError);
  {
    std::ofstream out(path);
    out << "subject_id,sex,age,landmark_name,bone_x,bone_y,bone_z,skin_x,skin_y,skin_z,present\n";
    out << "A,M,40,Glabella,0,0,0,0,0,1,1\n";
    out << "A,M,40,Glabella,0,0,0,0,0,1,1\n";
  }
  CHECK_THROWS_AS(load_population(path, builtin_registry()), SchemaError);
}

TEST_CASE("generate + save + load round trip") {
  GeneratorSpec spec;
  spec.subject_count = 12;
  spec.landmark_set = LandmarkSet::kSetB;
  const Population pop = generate_population(spec, 31337);

  const std::string path = temp_path("cfsim_roundtrip_pop.csv");
  PopulationMeta meta;
  meta.provenance = "generated";
  meta.seed = 31337;
  save_population(pop, path, meta);

  // 12 subjects x 29 set-B landmarks, one row each plus header.
  std::ifstream in(path);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + 12 * 29);

  const Population loaded = load_population(path, builtin_registry());
  CHECK(same_population(pop, loaded, 1e-12));
}

TEST_CASE("generate: determinism and validation") {
  GeneratorSpec spec;
  spec.subject_count = 0;
  CHECK_THROWS_AS(generate_population(spec, 1), InvalidSpec);

  spec.subject_count = 8;
  const Population a = generate_population(spec, 99);
  const Population b = generate_population(spec, 99);
  CHECK(same_population(a, b, 0.0));
  const Population c = generate_population(spec, 100);
  CHECK_FALSE(same_population(a, c, 0.0));
}

TEST_CASE("generate: 100 subjects are pairwise distinct") {
  GeneratorSpec spec;
  spec.subject_count = 100;
  const Population pop = generate_population(spec, 7);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  for (std::size_t i = 0; i < pop.subjects.size(); ++i) {
    for (std::size_t j = i + 1; j < pop.subjects.size(); ++j) {
      double mean_dist = 0.0;
      for (LandmarkId lid : ids) {
        mean_dist += (pop.subjects[i].at(lid).bone - pop.subjects[j].at(lid).bone).norm();
      }
      mean_dist /= static_cast<double>(ids.size());
      CHECK(mean_dist > 0.1);
    }
  }
}

TEST_CASE("generate: thickness window respected") {
  GeneratorSpec spec;
  spec.subject_count = 50;
  const Population pop = generate_population(spec, 11);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  for (const auto& rec : pop.subjects) {
    for (LandmarkId lid : ids) {
      const double t = rec.thickness(lid);
      CHECK(t > 0.5);
      CHECK(t < 40.0);
    }
  }
}

TEST_CASE("filter: zero-thickness and missing landmarks are rejected with reasons") {
  GeneratorSpec spec;
  spec.subject_count = 6;
  Population pop = generate_population(spec, 5);
  const auto ids = pop.registry->set_ids(spec.landmark_set);

  // Implant: subject 0 zero FSTT, subject 1 missing landmark.
  pop.subjects[0].landmarks[static_cast<std::size_t>(ids[3])].skin =
      pop.subjects[0].landmarks[static_cast<std::size_t>(ids[3])].bone;
  pop.subjects[1].landmarks[static_cast<std::size_t>(ids[5])].present = false;

  FilterCriteria criteria;
  criteria.required = ids;
  const auto [kept, report] = filter_subjects(pop, criteria);
  CHECK(kept.subjects.size() == 4);
  REQUIRE(report.items.size() == 2);
  CHECK(report.items[0].subject_id == "S0000");
  CHECK(report.items[0].reason.find("outside") != std::string::npos);
  CHECK(report.items[1].subject_id == "S0001");
  CHECK(report.items[1].reason.find("not present") != std::string::npos);
}

TEST_CASE("filter: clean population passes untouched, and filtering is idempotent") {
  GeneratorSpec spec;
  spec.subject_count = 40;
  const Population pop = generate_population(spec, 1234);
  FilterCriteria criteria;
  criteria.required = pop.registry->set_ids(spec.landmark_set);

  const auto [kept, report] = filter_subjects(pop, criteria);
  CHECK(report.items.empty());
  CHECK(kept.subjects.size() == 40);

  const auto [again, report2] = filter_subjects(kept, criteria);
  CHECK(report2.items.empty());
  CHECK(again.subjects.size() == kept.subjects.size());
}

TEST_CASE("filter: implanted 100 mm outlier is rejected, exactly that subject") {
  GeneratorSpec spec;
  spec.subject_count = 25;
  Population pop = generate_population(spec, 77);
  const auto ids = pop.registry->set_ids(spec.landmark_set);

  auto& sample = pop.subjects[13].landmarks[static_cast<std::size_t>(ids[0])];
  const Point3 dir = (sample.skin - sample.bone).normalized();
  sample.skin = sample.bone + 100.0 * dir;

  FilterCriteria criteria;
  criteria.required = ids;
  const auto [kept, report] = filter_subjects(pop, criteria);
  CHECK(kept.subjects.size() == 24);
  REQUIRE(report.items.size() == 1);
  CHECK(report.items[0].subject_id == "S0013");
}

TEST_CASE("filter: MAD gate catches in-window outliers") {
  GeneratorSpec spec;
  spec.subject_count = 30;
  Population pop = generate_population(spec, 42);
  const auto ids = pop.registry->set_ids(spec.landmark_set);

  // 45 mm is inside (0, 60) but far beyond 5 MAD of a ~1 mm-sd landmark.
  auto& sample = pop.subjects[7].landmarks[static_cast<std::size_t>(ids[1])];
  const Point3 dir = (sample.skin - sample.bone).normalized();
  sample.skin = sample.bone + 45.0 * dir;

  FilterCriteria criteria;
  criteria.required = ids;
  const auto [kept, report] = filter_subjects(pop, criteria);
  CHECK(kept.subjects.size() == 29);
  REQUIRE(report.items.size() == 1);
  CHECK(report.items[0].subject_id == "S0007");
  CHECK(report.items[0].reason.find("MAD") != std::string::npos);
}

TEST_CASE("filter: EmptyResult when everything is rejected") {
  GeneratorSpec spec;
  spec.subject_count = 3;
  Population pop = generate_population(spec, 9);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  for (auto& rec : pop.subjects) {
    rec.landmarks[static_cast<std::size_t>(ids[0])].present = false;
  }
  FilterCriteria criteria;
  criteria.required = ids;
  CHECK_THROWS_AS(filter_subjects(pop, criteria), EmptyResult);
}

TEST_CASE("pca_align: identical subjects under rigid motion align identically") {
  GeneratorSpec spec;
  spec.subject_count = 1;
  Population pop = generate_population(spec, 2024);
  // Duplicate the subject under a random rigid motion.
  CounterRng rng{55};
  const Eigen::Matrix3d r = cfsim::testing::random_rotation(rng);
  const Point3 shift(120.0, -40.0, 310.0);
  SubjectRecord moved = pop.subjects[0];
  moved.subject_id = "S9999";
  for (auto& sample : moved.landmarks) {
    if (!sample.present) continue;
    sample.bone = r * sample.bone + shift;
    sample.skin = r * sample.skin + shift;
  }
  pop.subjects.push_back(moved);

  const auto [aligned, transforms] = pca_align(pop);
  REQUIRE(transforms.size() == 2);
  for (std::size_t l = 0; l < aligned.subjects[0].landmarks.size(); ++l) {
    if (!aligned.subjects[0].landmarks[l].present) continue;
    const Point3 d0 = aligned.subjects[0].landmarks[l].bone;
    const Point3 d1 = aligned.subjects[1].landmarks[l].bone;
    CHECK((d0 - d1).cwiseAbs().maxCoeff() < 1e-6);
    const Point3 s0 = aligned.subjects[0].landmarks[l].skin;
    const Point3 s1 = aligned.subjects[1].landmarks[l].skin;
    CHECK((s0 - s1).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("pca_align: centroid at origin, distances preserved") {
  GeneratorSpec spec;
  spec.subject_count = 5;
  const Population pop = generate_population(spec, 3);
  const auto [aligned, transforms] = pca_align(pop);
  CHECK(aligned.frame == Frame::kAligned);

  const auto ids = pop.registry->set_ids(spec.landmark_set);
  for (std::size_t s = 0; s < aligned.subjects.size(); ++s) {
    Point3 centroid = Point3::Zero();
    for (LandmarkId lid : ids) centroid += aligned.subjects[s].at(lid).bone;
    centroid /= static_cast<double>(ids.size());
    CHECK(centroid.norm() < 1e-9);

    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); j += 7) {
        const double before =
            (pop.subjects[s].at(ids[i]).bone - pop.subjects[s].at(ids[j]).bone).norm();
        const double after =
            (aligned.subjects[s].at(ids[i]).bone - aligned.subjects[s].at(ids[j]).bone).norm();
        CHECK(std::abs(before - after) < 1e-9);
      }
    }
  }
}

TEST_CASE("compute_stats: identical subjects collapse to that subject's values") {
  GeneratorSpec spec;
  spec.subject_count = 1;
  Population pop = generate_population(spec, 808);
  for (int copy = 0; copy < 3; ++copy) {
    SubjectRecord rec = pop.subjects[0];
    rec.subject_id = "C" + std::to_string(copy);
    pop.subjects.push_back(rec);
  }
  const auto [aligned, transforms] = pca_align(pop);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  const PopulationStats stats = compute_stats(aligned, ids);
  for (LandmarkId lid : ids) {
    CHECK(stats.at(lid).sample_count == 4);
    CHECK(stats.at(lid).mean_thickness ==
          doctest::Approx(aligned.subjects[0].thickness(lid)).epsilon(1e-12));
    const Point3 dir = (aligned.subjects[0].at(lid).skin - aligned.subjects[0].at(lid).bone)
                           .normalized();
    CHECK((stats.at(lid).mean_direction - dir).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("compute_stats: two-direction symmetry example") {
  // Hand-built aligned population: two subjects, one landmark, directions
  // (1,0,0) and (0,1,0) at thickness 2 and 4.
  auto registry = builtin_registry();
  const LandmarkId lid = registry->id_of("Glabella");
  Population pop;
  pop.registry = registry;
  pop.frame = Frame::kAligned;
  for (int i = 0; i < 2; ++i) {
    SubjectRecord rec;
    rec.subject_id = "S" + std::to_string(i);
    rec.landmarks.assign(registry->size(), LandmarkSample{});
    auto& sample = rec.landmarks[static_cast<std::size_t>(lid)];
    sample.present = true;
    sample.bone = Point3(10, 20, 30);
    sample.skin = sample.bone + (i == 0 ? Point3(2, 0, 0) : Point3(0, 4, 0));
    pop.subjects.push_back(std::move(rec));
  }
  const PopulationStats stats = compute_stats(pop);
  CHECK(stats.at(lid).mean_thickness == doctest::Approx(3.0).epsilon(1e-12));
  const Point3 expected = Point3(1, 1, 0).normalized();
  CHECK((stats.at(lid).mean_direction - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compute_stats: matches a naive two-pass oracle and is permutation-invariant") {
  GeneratorSpec spec;
  spec.subject_count = 50;
  const Population pop = generate_population(spec, 606);
  const auto [aligned, transforms] = pca_align(pop);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  const PopulationStats stats = compute_stats(aligned, ids);

  for (LandmarkId lid : ids) {
    double sum = 0.0;
    Point3 dsum = Point3::Zero();
    int count = 0;
    for (const auto& rec : aligned.subjects) {
      if (!rec.has(lid)) continue;
      const Point3 v = rec.at(lid).skin - rec.at(lid).bone;
      sum += v.norm();
      dsum += v.normalized();
      ++count;
    }
    CHECK(stats.at(lid).sample_count == count);
    CHECK(stats.at(lid).mean_thickness == doctest::Approx(sum / count).epsilon(1e-12));
    CHECK((stats.at(lid).mean_direction - dsum.normalized()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(stats.at(lid).mean_direction.norm() - 1.0) < 1e-9);
  }

  Population shuffled = aligned;
  std::reverse(shuffled.subjects.begin(), shuffled.subjects.end());
  const PopulationStats stats2 = compute_stats(shuffled, ids);
  for (LandmarkId lid : ids) {
    CHECK(stats2.at(lid).mean_thickness == doctest::Approx(stats.at(lid).mean_thickness).epsilon(1e-12));
    CHECK((stats2.at(lid).mean_direction - stats.at(lid).mean_direction).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("compute_stats: InsufficientSamples for underrepresented required landmarks") {
  GeneratorSpec spec;
  spec.subject_count = 3;
  Population pop = generate_population(spec, 19);
  const auto ids = pop.registry->set_ids(spec.landmark_set);
  for (auto& rec : pop.subjects) rec.landmarks[static_cast<std::size_t>(ids[2])].present = false;
  pop.subjects[0].landmarks[static_cast<std::size_t>(ids[2])].present = true;
  const auto [aligned, transforms] = pca_align(pop);
  CHECK_THROWS_AS(compute_stats(aligned, ids), InsufficientSamples);
  // Without the requirement the landmark is simply skipped.
  const PopulationStats stats = compute_stats(aligned);
  CHECK(stats.at(ids[2]).sample_count == 1);
}

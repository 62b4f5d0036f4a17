#include <doctest.h>

#include <fstream>
#include <set>

#include "cl3d/core/dataset.hpp"
#include "cl3d/core/mesh.hpp"
#include "cl3d/core/synthetic.hpp"
#include "cl3d/error.hpp"
#include "helpers.hpp"

using namespace cl3d;

namespace {

const char* kCubeOff = R"(OFF
# unit cube
8 6 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 1 2 3
4 4 5 6 7
4 0 1 5 4
4 2 3 7 6
4 1 2 6 5
4 0 3 7 4
)";

}  // namespace

TEST_CASE("point cloud rejects empty and non-finite input") {
  CHECK_THROWS_AS(PointCloud(Points(0, 3), "a"), DataError);
  Points p = Points::Zero(2, 3);
  p(1, 2) = std::nan("");
  CHECK_THROWS_AS(PointCloud(p, "a"), DataError);
}

TEST_CASE("normalize centers and scales to the unit ball") {
  Rng rng(3);
  const Points raw = test::random_points(50, rng, 4.0).rowwise() + Eigen::RowVector3d(10, -2, 5);
  const Points n = normalize(raw);
  CHECK(n.colwise().mean().norm() < 1e-12);
  CHECK(n.rowwise().norm().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(normalize(Points::Ones(4, 3)), DataError);
}

TEST_CASE("xyz files round-trip bit-exactly and report bad lines") {
  test::TempDir dir("xyz");
  Rng rng(1);
  const Points p = test::random_points(17, rng);
  write_xyz(dir.path() / "a.xyz", p);
  const Points q = read_xyz(dir.path() / "a.xyz");
  CHECK((p.array() == q.array()).all());

  std::ofstream(dir.path() / "bad.xyz") << "# header\n1 2 3\n\n4 five 6\n";
  try {
    read_xyz(dir.path() / "bad.xyz");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("OFF parsing") {
  SUBCASE("quads are fan-triangulated") {
    const Mesh m = parse_off(kCubeOff);
    CHECK(m.vertices.size() == 8);
    CHECK(m.face_count == 6);
    CHECK(m.triangles.size() == 12);
    double area = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) area += triangle_area(m, t);
    CHECK(area == doctest::Approx(6.0));
  }
  SUBCASE("header fused with counts") {
    const Mesh m = parse_off("OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    CHECK(m.triangles.size() == 1);
  }
  SUBCASE("malformed input names the line") {
    try {
      parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 6);
    }
    CHECK_THROWS_AS(parse_off("PLY\n"), ParseError);
    CHECK_THROWS_AS(parse_off("OFF\n3 1 0\n0 0 0\n"), ParseError);
  }
}

TEST_CASE("surface sampling") {
  const Mesh cube = parse_off(kCubeOff);
  SUBCASE("points lie on the surface and sampling is seeded") {
    const PointCloud a = sample_surface(cube, 500, 9, "a");
    const PointCloud b = sample_surface(cube, 500, 9, "a");
    CHECK(a == b);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Eigen::RowVector3d p = a.points().row(i);
      const double face_gap = std::min(p.minCoeff(), 1.0 - p.maxCoeff());
      CHECK(std::abs(face_gap) < 1e-12);
    }
  }
  SUBCASE("triangles are hit in proportion to area") {
    // Two disjoint triangles with area ratio 3:1.
    const Mesh m = parse_off("OFF\n6 2 0\n0 0 0\n3 0 0\n0 1 0\n10 0 0\n11 0 0\n10 1 0\n3 0 1 2\n3 3 4 5\n");
    const std::size_t n = 20000;
    const PointCloud c = sample_surface(m, n, 4);
    std::size_t big = 0;
    for (Eigen::Index i = 0; i < c.size(); ++i) big += c.points()(i, 0) < 5.0;
    const double p = 0.75, sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(big) / n - p) < 3 * sigma);
  }
  SUBCASE("degenerate requests fail") {
    CHECK_THROWS_AS(sample_surface(cube, 0, 1), DataError);
    CHECK_THROWS_AS(sample_surface(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n"), 10, 1), DataError);
  }
}

TEST_CASE("synthetic generation") {
  ClassSpec spec{"mix", {{Primitive::Sphere, Eigen::Vector3d::Ones(), 0.5, 0.3},
                         {Primitive::Box, Eigen::Vector3d(1, 1, 0.3), 0.5, 0.3}}};
  SyntheticOptions opts;
  opts.points = 64;
  const auto a = generate_synthetic(spec, 2, 20, 11, opts, "mix/");
  const auto b = generate_synthetic(spec, 2, 20, 11, opts, "mix/");
  REQUIRE(a.size() == 20);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].cloud == b[i].cloud);
    CHECK(a[i].label == 2);
    CHECK(a[i].cloud.size() == 64);
    CHECK(a[i].cloud.points().rowwise().norm().maxCoeff() == doctest::Approx(1.0));
    ids.insert(a[i].id());
  }
  CHECK(ids.size() == 20);
  CHECK(generate_synthetic(spec, 2, 20, 12, opts, "mix/")[0].cloud.points() != a[0].cloud.points());

  opts.balanced_modes = true;
  const auto bal = generate_synthetic(spec, 0, 10, 1, opts, "m/");
  int mode0 = 0;
  for (const auto& s : bal) mode0 += s.mode == 0;
  CHECK(mode0 == 5);
  CHECK_THROWS_AS(generate_synthetic(ClassSpec{"empty", {}}, 0, 3, 1, opts, ""), ConfigError);
}

TEST_CASE("dataset manifests") {
  test::TempDir dir("manifest");
  SyntheticDatasetSpec spec = builtin_benchmark_spec(5);
  spec.train_per_class = 4;
  spec.test_per_class = 2;
  spec.options.points = 32;
  const Dataset ds = make_synthetic_dataset(spec);
  REQUIRE(ds.num_classes() == 8);

  SUBCASE("write then load reproduces every cloud") {
    write_dataset(ds, dir.path());
    const Dataset back = load_dataset(dir.path() / "manifest.json");
    REQUIRE(back.class_names == ds.class_names);
    for (std::size_t c = 0; c < ds.num_classes(); ++c) {
      REQUIRE(back.train[c].size() == ds.train[c].size());
      for (std::size_t i = 0; i < ds.train[c].size(); ++i) {
        CHECK(back.train[c][i].id() == ds.train[c][i].id());
        CHECK((back.train[c][i].cloud.points().array() == ds.train[c][i].cloud.points().array()).all());
        CHECK(back.train[c][i].mode == ds.train[c][i].mode);
      }
    }
  }
  SUBCASE("unknown keys and train/test overlap are rejected") {
    write_dataset(ds, dir.path());
    nlohmann::json j;
    std::ifstream(dir.path() / "manifest.json") >> j;
    nlohmann::json bad = j;
    bad["extra"] = 1;
    std::ofstream(dir.path() / "bad.json") << bad.dump();
    CHECK_THROWS_AS(load_dataset(dir.path() / "bad.json"), ConfigError);

    nlohmann::json overlap = j;
    overlap["classes"][0]["test"][0] = overlap["classes"][0]["train"][0];
    std::ofstream(dir.path() / "overlap.json") << overlap.dump();
    CHECK_THROWS_AS(load_dataset(dir.path() / "overlap.json"), DataError);
  }
  SUBCASE("synthetic spec JSON round-trips") {
    const SyntheticDatasetSpec back = synthetic_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
    nlohmann::json bad = to_json(spec);
    bad["classes"][0]["modes"][0]["colour"] = "red";
    CHECK_THROWS_AS(synthetic_spec_from_json(bad), ConfigError);
  }
}

TEST_CASE("task sequences") {
  const TaskSequence t = TaskSequence::uniform(8, 2);
  CHECK(t.num_stages() == 4);
  CHECK(t.classes_through(1) == std::vector<int>{0, 1, 2, 3});
  CHECK_THROWS_AS(TaskSequence({{0, 1}, {1, 2}}, 3), ConfigError);
  CHECK_THROWS_AS(TaskSequence({{0}, {2}}, 3), ConfigError);
  CHECK_THROWS_AS(TaskSequence({{0, 5}}, 3), ConfigError);
  CHECK(TaskSequence::uniform(5, 2).stages().back() == std::vector<int>{4});
}

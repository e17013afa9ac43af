#include <doctest.h>

#include <cmath>
#include <random>

#include "error.hpp"
#include "mesh.hpp"
#include "test_util.hpp"

using namespace fiberpinn;

TEST_SUITE("mesh") {
TEST_CASE("counting on tiny OBJ files") {
  const auto dir = testutil::scratch_dir("mesh_obj");
  testutil::write_file(dir / "tri.obj", "# one triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1 2 3\n");
  const TriMesh tri = load_mesh(dir / "tri.obj", MeshFormat::Obj);
  CHECK(tri.vertex_count() == 3);
  CHECK(tri.triangle_count() == 1);
  CHECK(tri.edges().size() == 3);

  testutil::write_file(dir / "sq.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n");
  const TriMesh sq = load_mesh(dir / "sq.obj", MeshFormat::Obj);
  CHECK(sq.vertex_count() == 4);
  CHECK(sq.triangle_count() == 2);
  CHECK(sq.edges().size() == 5);
  CHECK(sq.vertices()[2] == Vec3(1, 1, 0));
}

TEST_CASE("OBJ errors carry context") {
  const auto dir = testutil::scratch_dir("mesh_obj_err");
  testutil::write_file(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 7\n");
  try {
    load_mesh(dir / "bad.obj", MeshFormat::Obj);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
  testutil::write_file(dir / "degenerate.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(load_mesh(dir / "degenerate.obj", MeshFormat::Obj), Error);
  testutil::write_file(dir / "garbage.obj", "v 0 zero 0\n");
  CHECK_THROWS_AS(load_mesh(dir / "garbage.obj", MeshFormat::Obj), Error);
  CHECK_THROWS_AS(load_mesh(dir / "missing.obj", MeshFormat::Obj), Error);
}

TEST_CASE("non-manifold edge rejected") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
  std::vector<Triangle> t = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  CHECK_THROWS_AS(TriMesh(v, t), Error);
}

TEST_CASE("inconsistent winding is a warning") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  const TriMesh ok(v, {{0, 1, 2}, {0, 2, 3}});
  CHECK(ok.warnings().empty());
  const TriMesh flipped(v, {{0, 1, 2}, {0, 3, 2}});
  CHECK_FALSE(flipped.warnings().empty());
}

TEST_CASE("vertex normals") {
  const TriMesh sheet = make_sheet(4, 3, 4, 3);
  for (const Vec3& n : vertex_normals(sheet)) CHECK((n - Vec3::UnitZ()).norm() < 1e-15);

  const TriMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 0, 1}}, {{{0, 1, 2}}});
  for (const Vec3& n : vertex_normals(tri)) CHECK((n - tri.face_normal(0)).norm() < 1e-15);

  const TriMesh sphere = make_icosphere(3, 1.0);
  const auto normals = vertex_normals(sphere);
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double c = normals[i].dot(sphere.vertices()[i].normalized());
    CHECK(std::acos(std::min(1.0, c)) * 180.0 / M_PI < 5.0);
  }
}

TEST_CASE("icosphere area approaches 4 pi") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  double area = 0.0;
  for (double a : sphere.areas()) area += a;
  CHECK(std::abs(area - 4.0 * M_PI) / (4.0 * M_PI) < 0.03);
}

TEST_CASE("projection") {
  const TriMesh sphere = make_icosphere(2, 10.0);
  for (std::size_t i = 0; i < sphere.vertex_count(); ++i) {
    const SurfacePoint sp = project_point(sphere, sphere.vertices()[i]);
    CHECK((sp.position - sphere.vertices()[i]).norm() < 1e-12);
    CHECK(sp.barycentric.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  }

  const TriMesh tri({{0, 0, 0}, {3, 0, 0}, {0, 3, 0}}, {{{0, 1, 2}}});
  const SurfacePoint c = project_point(tri, Vec3(1, 1, 1));
  CHECK((c.position - Vec3(1, 1, 0)).norm() < 1e-14);
  CHECK((c.barycentric - Vec3::Constant(1.0 / 3.0)).norm() < 1e-14);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const SurfacePoint sp = project_point(sphere, p);
    CHECK(std::abs(sp.barycentric.sum() - 1.0) < 1e-12);
    CHECK(sp.barycentric.minCoeff() >= 0.0);
    const double d = (sp.position - p).norm();
    for (const Vec3& v : sphere.vertices()) CHECK(d <= (v - p).norm() + 1e-12);
    // Brute-force minimum over triangles.
    double best = 1e300;
    for (const Triangle& t : sphere.triangles()) {
      const Vec3 bc = closest_point_barycentric(p, sphere.vertices()[t[0]], sphere.vertices()[t[1]],
                                                sphere.vertices()[t[2]]);
      const Vec3 q = bc[0] * sphere.vertices()[t[0]] + bc[1] * sphere.vertices()[t[1]] + bc[2] * sphere.vertices()[t[2]];
      best = std::min(best, (q - p).norm());
    }
    CHECK(d == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("mean edge length") {
  const TriMesh tri({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{{0, 1, 2}}});
  CHECK(mean_edge_length(tri) == doctest::Approx((2.0 + std::sqrt(2.0)) / 3.0).epsilon(1e-15));
  // 2x2 cells of spacing 2: 12 axis edges of length 2 and 4 diagonals.
  const TriMesh grid = make_sheet(4, 4, 2, 2);
  CHECK(grid.edges().size() == 16);
  CHECK(mean_edge_length(grid) == doctest::Approx((12 * 2.0 + 4 * 2.0 * std::sqrt(2.0)) / 16.0).epsilon(1e-15));
  CHECK_THROWS_AS(mean_edge_length(TriMesh()), Error);
}

TEST_CASE("VTK round trip is bit exact") {
  const auto dir = testutil::scratch_dir("mesh_vtk");
  std::vector<Vec3> v = {{0.1, 1.0 / 3.0, -2e-17}, {M_PI, 0, 1e300}, {std::sqrt(2.0), 7, 0.5}};
  const TriMesh mesh(v, {{{0, 1, 2}}});
  PointData pd;
  pd.scalars.emplace_back("phi_ms", std::vector<double>{1.0 / 7.0, 2.5, -0.0});
  pd.vectors.emplace_back("fiber", std::vector<Vec3>{{1, 0, 0}, {0, 1.0 / 3.0, 0}, {0, 0, 1}});
  save_vtk(dir / "m.vtk", mesh, pd);
  const VtkPolyData back = load_vtk(dir / "m.vtk");
  REQUIRE(back.mesh.vertex_count() == 3);
  for (int i = 0; i < 3; ++i) CHECK(back.mesh.vertices()[i] == v[i]);
  CHECK(back.mesh.triangles() == mesh.triangles());
  REQUIRE(back.point_data.scalar("phi_ms") != nullptr);
  CHECK(*back.point_data.scalar("phi_ms") == pd.scalars[0].second);
  REQUIRE(back.point_data.vector("fiber") != nullptr);
  CHECK(*back.point_data.vector("fiber") == pd.vectors[0].second);

  save_obj(dir / "m.obj", mesh);
  const TriMesh obj = load_mesh(dir / "m.obj", MeshFormat::Obj);
  for (int i = 0; i < 3; ++i) CHECK(obj.vertices()[i] == v[i]);
  CHECK(mesh_format_from_path(dir / "m.vtk") == MeshFormat::VtkLegacy);
  CHECK(mesh_format_from_path(dir / "m.obj") == MeshFormat::Obj);
}

TEST_CASE("VTK reader accepts float points") {
  const auto dir = testutil::scratch_dir("mesh_vtk_float");
  testutil::write_file(dir / "f.vtk",
                       "# vtk DataFile Version 3.0\nx\nASCII\nDATASET POLYDATA\nPOINTS 3 float\n0 0 0 1 0 0\n0 1 0\n"
                       "POLYGONS 1 4\n3 0 1 2\nPOINT_DATA 3\nSCALARS phi_ms float 1\nLOOKUP_TABLE default\n0 1 2\n");
  const VtkPolyData d = load_vtk(dir / "f.vtk");
  CHECK(d.mesh.triangle_count() == 1);
  CHECK((*d.point_data.scalar("phi_ms"))[2] == 2.0);
}
}

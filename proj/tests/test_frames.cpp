#include <doctest.h>

#include <random>

#include "error.hpp"
#include "frames.hpp"

using namespace fiberpinn;

namespace {

void check_orthonormal(const Vec3& t1, const Vec3& t2, const Vec3& n) {
  CHECK(std::abs(t1.norm() - 1.0) <= 1e-10);
  CHECK(std::abs(t2.norm() - 1.0) <= 1e-10);
  CHECK(std::abs(n.norm() - 1.0) <= 1e-10);
  CHECK(std::abs(t1.dot(t2)) <= 1e-10);
  CHECK(std::abs(t1.dot(n)) <= 1e-10);
  CHECK(std::abs(t2.dot(n)) <= 1e-10);
  CHECK((t1.cross(t2) - n).norm() <= 1e-8);
}

SurfacePoint random_point(const TriMesh& mesh, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(mesh.triangle_count()) - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SurfacePoint sp;
  sp.triangle = pick(rng);
  double a = u(rng), b = u(rng);
  if (a + b > 1.0) {
    a = 1.0 - a;
    b = 1.0 - b;
  }
  sp.barycentric = Vec3(1.0 - a - b, a, b);
  const auto& t = mesh.triangles()[sp.triangle];
  sp.position = sp.barycentric[0] * mesh.vertices()[t[0]] + sp.barycentric[1] * mesh.vertices()[t[1]] +
                sp.barycentric[2] * mesh.vertices()[t[2]];
  return sp;
}

}  // namespace

TEST_SUITE("frames") {
TEST_CASE("planar sheet gives the global frame") {
  const TriMesh sheet = make_sheet(10, 10, 5, 5);
  for (int iters : {0, 3, 100}) {
    const FrameField f = build_frames(sheet, {iters, 0, Vec3::UnitX()});
    for (std::size_t v = 0; v < sheet.vertex_count(); ++v) {
      CHECK(f.t1[v] == Vec3::UnitX());
      CHECK(f.t2[v] == Vec3::UnitY());
    }
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      const Frame P = frame_at(sheet, f, random_point(sheet, rng));
      CHECK((P.col(0) - Vec3::UnitX()).norm() < 1e-15);
      CHECK((P.col(1) - Vec3::UnitY()).norm() < 1e-15);
    }
  }
}

TEST_CASE("orthonormality on curved surfaces") {
  for (const TriMesh& mesh : {make_cylinder(5.0, 20.0, 24, 10), make_icosphere(3, 1.0)}) {
    const FrameField f = build_frames(mesh, {100, 0, Vec3(0.3, 0.2, 1.0)});
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) check_orthonormal(f.t1[v], f.t2[v], f.normal[v]);
  }
}

TEST_CASE("frame_at") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  const FrameField f = build_frames(sphere, {100, 0, Vec3::UnitX()});
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const SurfacePoint sp = random_point(sphere, rng);
    const Frame P = frame_at(sphere, f, sp);
    CHECK((P.transpose() * P - Mat2::Identity()).norm() <= 1e-10);
    const auto& t = sphere.triangles()[sp.triangle];
    const Vec3 n = (sp.barycentric[0] * f.normal[t[0]] + sp.barycentric[1] * f.normal[t[1]] +
                    sp.barycentric[2] * f.normal[t[2]]).normalized();
    CHECK(std::abs(P.col(0).dot(n)) <= 1e-10);
    CHECK(std::abs(P.col(1).dot(n)) <= 1e-10);
  }
  for (int v = 0; v < 10; ++v) {
    const Frame P = frame_at(sphere, f, vertex_point(sphere, v));
    CHECK(P.col(0) == f.t1[v]);
    CHECK(P.col(1) == f.t2[v]);
  }
}

TEST_CASE("smoothing reduces adjacent angles") {
  const TriMesh sphere = make_icosphere(3, 1.0);
  const double a10 = mean_adjacent_frame_angle(sphere, build_frames(sphere, {10, 0, Vec3::UnitX()}));
  const double a100 = mean_adjacent_frame_angle(sphere, build_frames(sphere, {100, 0, Vec3::UnitX()}));
  CHECK(a100 <= a10);
  const double a50 = mean_adjacent_frame_angle(sphere, build_frames(sphere, {50, 0, Vec3::UnitX()}));
  CHECK(a50 <= 15.0);
}

TEST_CASE("determinism") {
  const TriMesh sphere = make_icosphere(2, 3.0);
  const FrameField a = build_frames(sphere, {30, 5, Vec3(1, 2, 3)});
  const FrameField b = build_frames(sphere, {30, 5, Vec3(1, 2, 3)});
  CHECK(a.t1 == b.t1);
  CHECK(a.t2 == b.t2);
  CHECK(a.normal == b.normal);
}

TEST_CASE("seed parallel to the normal is rejected") {
  const TriMesh sheet = make_sheet(1, 1, 2, 2);
  CHECK_THROWS_AS(build_frames(sheet, {10, 0, Vec3::UnitZ()}), Error);
}
}

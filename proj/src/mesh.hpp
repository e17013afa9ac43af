#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fiberpinn {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Frame = Eigen::Matrix<double, 3, 2>;

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

// Triangulated surface. Immutable after construction; the constructor
// validates index range, non-degenerate area and edge-manifoldness.
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<double>& areas() const { return areas_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Sorted one-ring vertex neighbours.
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  const std::vector<std::vector<int>>& vertex_triangles() const { return vertex_triangles_; }
  // Non-fatal findings such as inconsistent winding.
  const std::vector<std::string>& warnings() const { return warnings_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t triangle_count() const { return triangles_.size(); }

  Vec3 face_normal(int tri) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<double> areas_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> vertex_triangles_;
  std::vector<std::string> warnings_;
};

struct SurfacePoint {
  int triangle = 0;
  Vec3 barycentric = Vec3(1.0, 0.0, 0.0);
  Vec3 position = Vec3::Zero();
};

enum class MeshFormat { Obj, VtkLegacy };

MeshFormat parse_mesh_format(const std::string& name);
// Guesses from the file extension (.obj / .vtk).
MeshFormat mesh_format_from_path(const std::filesystem::path& path);

// Named per-vertex fields carried alongside a VTK polydata mesh.
struct PointData {
  std::vector<std::pair<std::string, std::vector<double>>> scalars;
  std::vector<std::pair<std::string, std::vector<Vec3>>> vectors;

  const std::vector<double>* scalar(const std::string& name) const;
  const std::vector<Vec3>* vector(const std::string& name) const;
};

struct VtkPolyData {
  TriMesh mesh;
  PointData point_data;
};

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriMesh load_obj(const std::filesystem::path& path);
VtkPolyData load_vtk(const std::filesystem::path& path);

void save_obj(const std::filesystem::path& path, const TriMesh& mesh);
// Coordinates and field values are written with round-trip precision.
void save_vtk(const std::filesystem::path& path, const TriMesh& mesh,
              const PointData& point_data = {});

std::vector<Vec3> vertex_normals(const TriMesh& mesh);

// Closest point on the surface; ties go to the lowest triangle index.
SurfacePoint project_point(const TriMesh& mesh, const Vec3& p);
SurfacePoint vertex_point(const TriMesh& mesh, int vertex);

// Barycentric coordinates of the closest point of triangle (a, b, c) to p.
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

double mean_edge_length(const TriMesh& mesh);

// Parametric surfaces used as substitute geometry.
// Flat rectangle in z = 0 with nx * ny cells, each split along the diagonal,
// counterclockwise winding (normals +z).
TriMesh make_sheet(double width, double height, int nx, int ny);
// Chooses the cell counts so the grid spacing is close to `spacing`.
TriMesh make_sheet_with_spacing(double width, double height, double spacing);
TriMesh make_icosphere(int subdivisions, double radius = 1.0);
// Open cylinder around the z axis, outward normals.
TriMesh make_cylinder(double radius, double height, int around, int along);

}  // namespace fiberpinn

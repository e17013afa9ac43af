#include "mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "error.hpp"

namespace fiberpinn {

namespace {

constexpr double kMinTriangleArea = 1e-10;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

double parse_double(const std::string& token, const std::string& where) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::Parse, where + ": expected a number, got '" + token + "'");
  }
  return value;
}

long parse_long(const std::string& token, const std::string& where) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail(ErrorKind::Parse, where + ": expected an integer, got '" + token + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

// Whitespace tokenizer that remembers the line each token came from.
class Tokenizer {
 public:
  Tokenizer(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& token) {
    while (pos_ >= tokens_.size()) {
      std::string line;
      if (!std::getline(in_, line)) return false;
      ++line_no_;
      tokens_.clear();
      pos_ = 0;
      std::istringstream ls(line);
      std::string t;
      while (ls >> t) tokens_.push_back(t);
    }
    token = tokens_[pos_++];
    return true;
  }

  std::string expect(const char* what) {
    std::string token;
    if (!next(token)) {
      fail(ErrorKind::Parse, where() + ": unexpected end of file, expected " + what);
    }
    return token;
  }

  // Remainder of the current line as one string (used for the VTK title).
  std::string rest_of_line() {
    std::string out;
    while (pos_ < tokens_.size()) {
      if (!out.empty()) out += ' ';
      out += tokens_[pos_++];
    }
    return out;
  }

  std::string raw_line() {
    std::string line;
    if (!std::getline(in_, line)) fail(ErrorKind::Parse, where() + ": unexpected end of file");
    ++line_no_;
    tokens_.clear();
    pos_ = 0;
    return line;
  }

  std::string where() const { return source_ + ":" + std::to_string(line_no_); }

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

void check_triangles(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
                     const std::vector<std::string>& context) {
  const auto n = static_cast<long>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const std::string ctx =
        context.empty() ? "triangle " + std::to_string(t) : context[t] + " (triangle " + std::to_string(t) + ")";
    for (int idx : triangles[t]) {
      if (idx < 0 || idx >= n) {
        fail(ErrorKind::Invalid, ctx + ": vertex index " + std::to_string(idx) +
                                     " out of range (" + std::to_string(n) + " vertices)");
      }
    }
    const auto& [a, b, c] = triangles[t];
    if (triangle_area(vertices[a], vertices[b], vertices[c]) <= kMinTriangleArea) {
      fail(ErrorKind::Invalid, ctx + ": degenerate triangle (area <= 1e-10)");
    }
  }
}

}  // namespace

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  check_triangles(vertices_, triangles_, {});

  const auto nv = vertices_.size();
  areas_.reserve(triangles_.size());
  neighbors_.assign(nv, {});
  vertex_triangles_.assign(nv, {});

  // Directed edge usage per undirected edge, for manifold and winding checks.
  struct EdgeUse {
    int count = 0;
    int first_from = -1;
    bool inconsistent = false;
  };
  std::unordered_map<std::uint64_t, EdgeUse> uses;
  std::vector<std::uint64_t> order;
  int inconsistent = 0;

  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    areas_.push_back(triangle_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]));
    for (int k = 0; k < 3; ++k) {
      const int from = tri[k];
      const int to = tri[(k + 1) % 3];
      vertex_triangles_[from].push_back(static_cast<int>(t));
      const auto key = edge_key(from, to);
      auto [it, inserted] = uses.try_emplace(key);
      if (inserted) order.push_back(key);
      EdgeUse& use = it->second;
      ++use.count;
      if (use.count > 2) {
        fail(ErrorKind::Invalid, "triangle " + std::to_string(t) + ": edge (" + std::to_string(from) +
                                     ", " + std::to_string(to) + ") shared by more than two triangles");
      }
      if (use.count == 1) {
        use.first_from = from;
      } else if (use.first_from == from) {
        use.inconsistent = true;
        ++inconsistent;
      }
    }
  }

  std::sort(order.begin(), order.end());
  edges_.reserve(order.size());
  for (auto key : order) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    edges_.push_back({a, b});
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& ring : neighbors_) std::sort(ring.begin(), ring.end());

  if (inconsistent > 0) {
    warnings_.push_back("inconsistent winding on " + std::to_string(inconsistent) +
                        " shared edge(s); orientation taken from file as-is");
  }
}

Vec3 TriMesh::face_normal(int tri) const {
  const auto& t = triangles_[tri];
  return (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).normalized();
}

const std::vector<double>* PointData::scalar(const std::string& name) const {
  for (const auto& [n, v] : scalars)
    if (n == name) return &v;
  return nullptr;
}

const std::vector<Vec3>* PointData::vector(const std::string& name) const {
  for (const auto& [n, v] : vectors)
    if (n == name) return &v;
  return nullptr;
}

MeshFormat parse_mesh_format(const std::string& name) {
  const auto u = upper(name);
  if (u == "OBJ") return MeshFormat::Obj;
  if (u == "VTK" || u == "VTK-LEGACY-ASCII" || u == "VTK_LEGACY") return MeshFormat::VtkLegacy;
  fail(ErrorKind::Config, "unknown mesh format '" + name + "' (expected obj or vtk)");
}

MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  const auto ext = upper(path.extension().string());
  if (ext == ".OBJ") return MeshFormat::Obj;
  if (ext == ".VTK") return MeshFormat::VtkLegacy;
  fail(ErrorKind::Config, "cannot infer mesh format from '" + path.string() + "'");
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  return format == MeshFormat::Obj ? load_obj(path) : load_vtk(path).mesh;
}

TriMesh load_obj(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::string> context;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tag == "v") {
      std::string x, y, z;
      if (!(ls >> x >> y >> z)) fail(ErrorKind::Parse, where + ": vertex needs three coordinates");
      vertices.emplace_back(parse_double(x, where), parse_double(y, where), parse_double(z, where));
    } else if (tag == "f") {
      std::vector<long> idx;
      std::string tok;
      while (ls >> tok) {
        // Drop texture/normal references ("i/j/k").
        idx.push_back(parse_long(tok.substr(0, tok.find('/')), where));
      }
      if (idx.size() != 3) {
        fail(ErrorKind::Parse, where + ": only triangular faces are supported (got " +
                                   std::to_string(idx.size()) + " vertices)");
      }
      Triangle tri{};
      for (int k = 0; k < 3; ++k) {
        if (idx[k] < 1) fail(ErrorKind::Invalid, where + ": face index " + std::to_string(idx[k]) + " out of range");
        tri[k] = static_cast<int>(idx[k] - 1);
      }
      triangles.push_back(tri);
      context.push_back(where);
    }
  }
  // OBJ indices are 1-based; report them as written.
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int i : triangles[t]) {
      if (static_cast<std::size_t>(i) >= vertices.size()) {
        fail(ErrorKind::Invalid, context[t] + ": face index " + std::to_string(i + 1) + " out of range (" +
                                     std::to_string(vertices.size()) + " vertices)");
      }
    }
  }
  check_triangles(vertices, triangles, context);
  return TriMesh(std::move(vertices), std::move(triangles));
}

VtkPolyData load_vtk(const std::filesystem::path& path) {
  auto in = open_input(path);
  Tokenizer tk(in, path.string());

  const std::string header = tk.raw_line();
  if (header.rfind("# vtk DataFile", 0) != 0) {
    fail(ErrorKind::Parse, tk.where() + ": missing '# vtk DataFile' header");
  }
  tk.raw_line();  // title
  if (upper(tk.expect("ASCII")) != "ASCII") {
    fail(ErrorKind::Parse, tk.where() + ": only ASCII legacy VTK is supported");
  }
  if (upper(tk.expect("DATASET")) != "DATASET" || upper(tk.expect("POLYDATA")) != "POLYDATA") {
    fail(ErrorKind::Parse, tk.where() + ": expected 'DATASET POLYDATA'");
  }

  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<std::string> context;
  PointData pd;
  long point_data_count = -1;

  std::string token;
  while (tk.next(token)) {
    const auto key = upper(token);
    if (key == "POINTS") {
      const long n = parse_long(tk.expect("point count"), tk.where());
      tk.expect("point type");
      vertices.resize(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) vertices[i][k] = parse_double(tk.expect("coordinate"), tk.where());
      }
    } else if (key == "POLYGONS") {
      const long n = parse_long(tk.expect("cell count"), tk.where());
      tk.expect("cell list size");
      for (long c = 0; c < n; ++c) {
        const long k = parse_long(tk.expect("cell size"), tk.where());
        if (k != 3) {
          fail(ErrorKind::Parse, tk.where() + ": polygon " + std::to_string(c) + " has " + std::to_string(k) +
                                     " vertices; only triangles are supported");
        }
        Triangle tri{};
        for (int j = 0; j < 3; ++j) tri[j] = static_cast<int>(parse_long(tk.expect("vertex index"), tk.where()));
        triangles.push_back(tri);
        context.push_back(tk.where() + " (cell " + std::to_string(c) + ")");
      }
    } else if (key == "POINT_DATA") {
      point_data_count = parse_long(tk.expect("point data count"), tk.where());
      if (point_data_count != static_cast<long>(vertices.size())) {
        fail(ErrorKind::Parse, tk.where() + ": POINT_DATA count does not match POINTS");
      }
    } else if (key == "SCALARS") {
      if (point_data_count < 0) fail(ErrorKind::Parse, tk.where() + ": SCALARS before POINT_DATA");
      const std::string name = tk.expect("scalar name");
      tk.expect("scalar type");
      std::string next = tk.expect("LOOKUP_TABLE");
      if (upper(next) != "LOOKUP_TABLE") {
        if (parse_long(next, tk.where()) != 1) {
          fail(ErrorKind::Parse, tk.where() + ": only single-component SCALARS are supported");
        }
        next = tk.expect("LOOKUP_TABLE");
      }
      if (upper(next) != "LOOKUP_TABLE") fail(ErrorKind::Parse, tk.where() + ": expected LOOKUP_TABLE");
      tk.expect("lookup table name");
      std::vector<double> values(static_cast<std::size_t>(point_data_count));
      for (auto& v : values) v = parse_double(tk.expect("scalar value"), tk.where());
      pd.scalars.emplace_back(name, std::move(values));
    } else if (key == "VECTORS" || key == "NORMALS") {
      if (point_data_count < 0) fail(ErrorKind::Parse, tk.where() + ": " + key + " before POINT_DATA");
      const std::string name = tk.expect("vector name");
      tk.expect("vector type");
      std::vector<Vec3> values(static_cast<std::size_t>(point_data_count));
      for (auto& v : values)
        for (int k = 0; k < 3; ++k) v[k] = parse_double(tk.expect("vector component"), tk.where());
      pd.vectors.emplace_back(name, std::move(values));
    } else {
      fail(ErrorKind::Parse, tk.where() + ": unsupported VTK section '" + token + "'");
    }
  }

  check_triangles(vertices, triangles, context);
  return {TriMesh(std::move(vertices), std::move(triangles)), std::move(pd)};
}

void save_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  auto out = open_output(path);
  for (const auto& v : mesh.vertices()) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  for (const auto& t : mesh.triangles()) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

void save_vtk(const std::filesystem::path& path, const TriMesh& mesh, const PointData& point_data) {
  auto out = open_output(path);
  const auto nv = mesh.vertex_count();
  out << "# vtk DataFile Version 3.0\nfiberpinn\nASCII\nDATASET POLYDATA\n";
  out << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices()) {
    out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
  }
  out << "POLYGONS " << mesh.triangle_count() << ' ' << 4 * mesh.triangle_count() << '\n';
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';

  if (!point_data.scalars.empty() || !point_data.vectors.empty()) {
    out << "POINT_DATA " << nv << '\n';
    for (const auto& [name, values] : point_data.scalars) {
      if (values.size() != nv) fail(ErrorKind::Invalid, "point field '" + name + "' has wrong length");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << format_double(v) << '\n';
    }
    for (const auto& [name, values] : point_data.vectors) {
      if (values.size() != nv) fail(ErrorKind::Invalid, "point field '" + name + "' has wrong length");
      out << "VECTORS " << name << " double\n";
      for (const auto& v : values) {
        out << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z()) << '\n';
      }
    }
  }
  if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertex_count(), Vec3::Zero());
  const auto& V = mesh.vertices();
  for (const auto& t : mesh.triangles()) {
    // Cross product length is twice the area: area weighting for free.
    const Vec3 n = (V[t[1]] - V[t[0]]).cross(V[t[2]] - V[t[0]]);
    for (int k : t) normals[k] += n;
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double len = normals[i].norm();
    if (!(len > 1e-300)) {
      fail(ErrorKind::Invalid, "vertex " + std::to_string(i) + ": zero accumulated normal (isolated or folded over)");
    }
    normals[i] /= len;
  }
  return normals;
}

Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region classification (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {1.0 - v, v, 0.0};
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {1.0 - w, 0.0, w};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0.0, 1.0 - w, w};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return {1.0 - v - w, v, w};
}

SurfacePoint project_point(const TriMesh& mesh, const Vec3& p) {
  const auto& V = mesh.vertices();
  SurfacePoint best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Vec3 bc = closest_point_barycentric(p, V[tri[0]], V[tri[1]], V[tri[2]]);
    const Vec3 q = bc[0] * V[tri[0]] + bc[1] * V[tri[1]] + bc[2] * V[tri[2]];
    const double d2 = (q - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.triangle = static_cast<int>(t);
      best.barycentric = bc;
      best.position = q;
    }
  }
  return best;
}

SurfacePoint vertex_point(const TriMesh& mesh, int vertex) {
  const auto& incident = mesh.vertex_triangles().at(vertex);
  if (incident.empty()) fail(ErrorKind::Invalid, "vertex " + std::to_string(vertex) + " has no incident triangle");
  SurfacePoint sp;
  sp.triangle = incident.front();
  const auto& tri = mesh.triangles()[sp.triangle];
  sp.barycentric = Vec3::Zero();
  for (int k = 0; k < 3; ++k)
    if (tri[k] == vertex) sp.barycentric[k] = 1.0;
  sp.position = mesh.vertices()[vertex];
  return sp;
}

double mean_edge_length(const TriMesh& mesh) {
  const auto& edges = mesh.edges();
  if (edges.empty()) fail(ErrorKind::Invalid, "mean edge length of a mesh without edges");
  double sum = 0.0;
  for (const auto& [a, b] : edges) sum += (mesh.vertices()[a] - mesh.vertices()[b]).norm();
  return sum / static_cast<double>(edges.size());
}

TriMesh make_sheet(double width, double height, int nx, int ny) {
  if (nx < 1 || ny < 1 || !(width > 0.0) || !(height > 0.0)) {
    fail(ErrorKind::Invalid, "sheet needs positive size and at least one cell per side");
  }
  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      vertices.emplace_back(width * i / nx, height * j / ny, 0.0);
    }
  }
  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

TriMesh make_sheet_with_spacing(double width, double height, double spacing) {
  if (!(spacing > 0.0)) fail(ErrorKind::Invalid, "sheet spacing must be positive");
  const int nx = std::max(1, static_cast<int>(std::lround(width / spacing)));
  const int ny = std::max(1, static_cast<int>(std::lround(height / spacing)));
  return make_sheet(width, height, nx, ny);
}

TriMesh make_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::unordered_map<std::uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& [a, b, c] : f) {
      const int ab = mid(a, b);
      const int bc = mid(b, c);
      const int ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return TriMesh(std::move(v), std::move(f));
}

TriMesh make_cylinder(double radius, double height, int around, int along) {
  if (around < 3 || along < 1) fail(ErrorKind::Invalid, "cylinder needs >= 3 segments around and >= 1 along");
  std::vector<Vec3> vertices;
  for (int j = 0; j <= along; ++j) {
    for (int i = 0; i < around; ++i) {
      const double a = 2.0 * M_PI * i / around;
      vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), height * j / along);
    }
  }
  std::vector<Triangle> triangles;
  auto id = [around](int i, int j) { return j * around + (i % around); };
  for (int j = 0; j < along; ++j) {
    for (int i = 0; i < around; ++i) {
      triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

}  // namespace fiberpinn

#include "pimc/bem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace pimc {

void MeshParams::validate(double rim) const {
  if (m1 < 1 || m2 < 1 || m3 < 1 || m4 < 1) throw BemError("every mesh layer needs at least one ring");
  if (!(alpha > 0.0) || !(alpha <= 1.0)) throw BemError("mesh grading ratio must be in (0, 1]");
  if (sectors < 3) throw BemError("a patch needs at least three sectors");
  if (!(0.0 < r1 && r1 < rim && rim < r2 && r2 < extended_radius)) {
    throw BemError("patch radii must satisfy 0 < r1 < r < r2 < r_e");
  }
  if (!(extended_radius < kPi / 2.0)) throw BemError("extended patch radius must be below pi/2");
  if (depth < 0 || depth > 8) throw BemError("icosphere depth must be in [0, 8]");
}

double MeshElement::diameter() const {
  double d = 0.0;
  for (int a = 0; a < n_vertices; ++a) {
    for (int b = a + 1; b < n_vertices; ++b) d = std::max(d, (vertices[a] - vertices[b]).norm());
  }
  return d;
}

namespace {

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  // Van Oosterom and Strackee.
  const double numerator = std::abs(a.dot(b.cross(c)));
  const double denominator = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(numerator, denominator);
}

}  // namespace

double spherical_polygon_area(const MeshElement& e) {
  double area = spherical_triangle_area(e.vertices[0], e.vertices[1], e.vertices[2]);
  if (e.n_vertices == 4) area += spherical_triangle_area(e.vertices[0], e.vertices[2], e.vertices[3]);
  return area;
}

MeshElement make_element(std::initializer_list<Vec3> vertices, BoundaryRegion region) {
  if (vertices.size() != 3 && vertices.size() != 4) throw BemError("elements have three or four corners");
  MeshElement e;
  e.n_vertices = static_cast<int>(vertices.size());
  Vec3 sum = Vec3::Zero();
  int k = 0;
  for (const Vec3& v : vertices) {
    e.vertices[k++] = v.normalized();
    sum += v.normalized();
  }
  e.centroid = sum.normalized();
  e.area = spherical_polygon_area(e);
  e.region = region;
  return e;
}

double SurfaceMesh::total_area() const {
  double sum = 0.0;
  for (const MeshElement& e : elements) sum += e.area;
  return sum;
}

double SurfaceMesh::electrode_area(int id) const {
  double sum = 0.0;
  for (const MeshElement& e : elements) {
    if (e.region == BoundaryRegion::robin(id)) sum += e.area;
  }
  return sum;
}

namespace {

enum class Grading { Outward, Inward, Uniform };

// Widths dx * alpha^i, smallest at the outer end (Outward), at the inner end
// (Inward) or all equal, scaled so they fill [a, b] exactly.
void append_layer(std::vector<double>& radii, double a, double b, int m, double alpha, Grading grading) {
  std::vector<double> widths(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int power = grading == Grading::Outward ? i : grading == Grading::Inward ? m - 1 - i : 0;
    widths[static_cast<std::size_t>(i)] = std::pow(alpha, power);
  }
  double total = 0.0;
  for (double w : widths) total += w;
  double rho = a;
  for (int i = 0; i < m; ++i) {
    rho += (b - a) * widths[static_cast<std::size_t>(i)] / total;
    radii.push_back(i == m - 1 ? b : rho);
  }
}

}  // namespace

std::vector<double> ring_radii(double rim, const MeshParams& p) {
  p.validate(rim);
  std::vector<double> radii{0.0};
  append_layer(radii, 0.0, p.r1, p.m1, p.alpha, Grading::Outward);
  append_layer(radii, p.r1, rim, p.m2, p.alpha, Grading::Outward);
  append_layer(radii, rim, p.r2, p.m3, p.alpha, Grading::Inward);
  append_layer(radii, p.r2, p.extended_radius, p.m4, p.alpha, Grading::Uniform);
  return radii;
}

SurfaceMesh build_graded_electrode_mesh(const Electrode& electrode, const MeshParams& params) {
  const std::vector<double> radii = ring_radii(electrode.cap_radius, params);
  const int n = params.sectors;
  const double dpsi = 2.0 * kPi / n;
  const Vec3& c = electrode.center;

  std::vector<std::vector<Vec3>> ring(radii.size());
  for (std::size_t k = 1; k < radii.size(); ++k) {
    ring[k].reserve(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) ring[k].push_back(point_on_cap(c, radii[k], m * dpsi));
  }

  SurfaceMesh mesh;
  mesh.params = params;
  mesh.elements.reserve((radii.size() - 1) * static_cast<std::size_t>(n));
  for (std::size_t k = 0; k + 1 < radii.size(); ++k) {
    const bool on_electrode = radii[k + 1] <= electrode.cap_radius * (1.0 + 1e-12);
    const BoundaryRegion region = on_electrode ? BoundaryRegion::robin(electrode.id) : BoundaryRegion::neumann();
    for (int m = 0; m < n; ++m) {
      const std::size_t a = static_cast<std::size_t>(m);
      const std::size_t b = static_cast<std::size_t>((m + 1) % n);
      if (k == 0) {
        mesh.elements.push_back(make_element({c, ring[1][a], ring[1][b]}, region));
      } else {
        mesh.elements.push_back(make_element({ring[k][a], ring[k + 1][a], ring[k + 1][b], ring[k][b]}, region));
      }
    }
  }
  return mesh;
}

namespace {

struct TriangleSoup {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

TriangleSoup icosphere_soup(int depth) {
  if (depth < 0 || depth > 8) throw BemError("icosphere depth must be in [0, 8]");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleSoup s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : s.vertices) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < depth; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
      const int id = static_cast<int>(s.vertices.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& f : s.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
  }
  return s;
}

}  // namespace

SurfaceMesh build_icosphere(int depth) {
  const TriangleSoup s = icosphere_soup(depth);
  SurfaceMesh mesh;
  mesh.params.depth = depth;
  mesh.elements.reserve(s.faces.size());
  for (const auto& f : s.faces) {
    mesh.elements.push_back(
        make_element({s.vertices[f[0]], s.vertices[f[1]], s.vertices[f[2]]}, BoundaryRegion::neumann()));
  }
  return mesh;
}

namespace {

constexpr double kAreaTolerance = 5e-3;

// Triangulates the annulus between the patch rim (sectors points at r_e) and
// the boundary loop of the holed icosphere around one electrode by walking
// both loops in order of azimuth.
void append_collar(SurfaceMesh& mesh, const Electrode& electrode, const MeshParams& params,
                   const std::vector<Vec3>& vertices, const std::vector<std::pair<int, int>>& edges) {
  const std::string where = "collar of electrode " + std::to_string(electrode.id);
  if (edges.size() < 3) throw BemError(where + ": no hole boundary; the icosphere is too coarse");
  std::map<int, std::vector<int>> next;
  for (const auto& [a, b] : edges) {
    next[a].push_back(b);
    next[b].push_back(a);
  }
  for (const auto& [v, nb] : next) {
    if (nb.size() != 2) throw BemError(where + ": hole boundary is not a simple loop; refine the icosphere");
  }
  std::vector<int> loop{edges.front().first};
  int prev = -1;
  while (true) {
    const auto& nb = next[loop.back()];
    const int step = nb[0] != prev ? nb[0] : nb[1];
    prev = loop.back();
    if (step == loop.front()) break;
    loop.push_back(step);
    if (loop.size() > edges.size()) break;
  }
  if (loop.size() != edges.size()) throw BemError(where + ": hole boundary splits into several loops");

  const auto [e1, e2] = tangent_frame(electrode.center);
  auto azimuth = [&, e1 = e1, e2 = e2](const Vec3& v) {
    const double a = std::atan2(v.dot(e2), v.dot(e1));
    return a < 0.0 ? a + 2.0 * kPi : a;
  };
  double winding = 0.0;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    double d = azimuth(vertices[loop[(k + 1) % loop.size()]]) - azimuth(vertices[loop[k]]);
    if (d > kPi) d -= 2.0 * kPi;
    if (d < -kPi) d += 2.0 * kPi;
    winding += d;
  }
  if (winding < 0.0) std::reverse(loop.begin(), loop.end());
  const auto first = std::min_element(loop.begin(), loop.end(), [&](int a, int b) {
    return azimuth(vertices[a]) < azimuth(vertices[b]);
  });
  std::rotate(loop.begin(), first, loop.end());

  const std::size_t m = loop.size();
  std::vector<double> outer_angle(m + 1);
  for (std::size_t k = 0; k < m; ++k) outer_angle[k] = azimuth(vertices[loop[k]]);
  outer_angle[m] = outer_angle[0] + 2.0 * kPi;
  for (std::size_t k = 1; k <= m; ++k) {
    if (!(outer_angle[k] > outer_angle[k - 1])) {
      throw BemError(where + ": hole boundary is not star-shaped about the electrode centre");
    }
  }

  const int n = params.sectors;
  const double dpsi = 2.0 * kPi / n;
  std::vector<Vec3> inner;
  for (int i = 0; i < n; ++i) inner.push_back(point_on_cap(electrode.center, params.extended_radius, i * dpsi));
  auto inner_at = [&](std::size_t i) { return inner[i % static_cast<std::size_t>(n)]; };
  auto outer_at = [&](std::size_t k) { return vertices[loop[k % m]]; };

  std::size_t i = 0;
  std::size_t k = 0;
  const auto ni = static_cast<std::size_t>(n);
  while (i < ni || k < m) {
    const bool advance_inner = k == m || (i < ni && static_cast<double>(i + 1) * dpsi < outer_angle[k + 1]);
    MeshElement e = advance_inner
                        ? make_element({inner_at(i), inner_at(i + 1), outer_at(k)}, BoundaryRegion::neumann())
                        : make_element({inner_at(i), outer_at(k + 1), outer_at(k)}, BoundaryRegion::neumann());
    if (!(e.area > 0.0)) throw BemError(where + ": degenerate collar triangle");
    mesh.elements.push_back(e);
    ++mesh.collar_elements;
    if (advance_inner) {
      ++i;
    } else {
      ++k;
    }
  }
}

void check_area(const SurfaceMesh& mesh) {
  const double sphere = 4.0 * kPi;
  const double error = std::abs(mesh.total_area() - sphere) / sphere;
  if (error > kAreaTolerance) {
    std::ostringstream os;
    os << "surface mesh covers the sphere with relative area defect " << error << " (gaps or overlaps)";
    throw BemError(os.str());
  }
}

}  // namespace

SurfaceMesh build_global_mesh(const DomainSpec& domain, const MeshParams& params) {
  if (domain.outer_condition() == OuterCondition::Absorbing) {
    SurfaceMesh mesh = build_icosphere(params.depth);
    mesh.params = params;
    for (MeshElement& e : mesh.elements) e.region = BoundaryRegion::outer_dirichlet();
    return mesh;
  }

  const auto& electrodes = domain.electrodes();
  if (electrodes.size() == 1 && electrodes.front().cap_radius >= kPi) {
    SurfaceMesh mesh = build_icosphere(params.depth);
    mesh.params = params;
    for (MeshElement& e : mesh.elements) e.region = BoundaryRegion::robin(electrodes.front().id);
    return mesh;
  }
  for (const Electrode& e : electrodes) params.validate(e.cap_radius);
  for (std::size_t a = 0; a < electrodes.size(); ++a) {
    for (std::size_t b = a + 1; b < electrodes.size(); ++b) {
      if (geodesic_distance(electrodes[a].center, electrodes[b].center) <= 2.0 * params.extended_radius) {
        throw BemError("extended caps of electrodes " + std::to_string(electrodes[a].id) + " and " +
                       std::to_string(electrodes[b].id) + " overlap");
      }
    }
  }

  SurfaceMesh mesh;
  mesh.params = params;
  for (const Electrode& e : electrodes) {
    SurfaceMesh patch = build_graded_electrode_mesh(e, params);
    mesh.elements.insert(mesh.elements.end(), patch.elements.begin(), patch.elements.end());
  }

  const TriangleSoup s = icosphere_soup(params.depth);
  double edge = 0.0;
  for (const auto& f : s.faces) edge += (s.vertices[f[0]] - s.vertices[f[1]]).norm();
  edge /= static_cast<double>(s.faces.size());

  // Icosphere triangles touching the widened caps are removed; the hole left
  // around each cap is closed by a collar stitched to the patch rim.
  const double hole = params.extended_radius + 0.5 * edge;
  std::vector<int> owner(s.vertices.size(), -1);
  for (std::size_t v = 0; v < s.vertices.size(); ++v) {
    for (std::size_t l = 0; l < electrodes.size(); ++l) {
      if (geodesic_distance(s.vertices[v], electrodes[l].center) < hole) owner[v] = static_cast<int>(l);
    }
  }
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& f : s.faces) {
    if (owner[f[0]] >= 0 || owner[f[1]] >= 0 || owner[f[2]] >= 0) continue;
    mesh.elements.push_back(
        make_element({s.vertices[f[0]], s.vertices[f[1]], s.vertices[f[2]]}, BoundaryRegion::neumann()));
    for (int k = 0; k < 3; ++k) ++edge_use[std::minmax(f[k], f[(k + 1) % 3])];
  }
  std::vector<std::vector<std::pair<int, int>>> rim_edges(electrodes.size());
  for (const auto& [e, uses] : edge_use) {
    if (uses != 1) continue;
    const Vec3 mid = (s.vertices[e.first] + s.vertices[e.second]).normalized();
    std::size_t best = 0;
    for (std::size_t l = 1; l < electrodes.size(); ++l) {
      if (geodesic_distance(mid, electrodes[l].center) < geodesic_distance(mid, electrodes[best].center)) best = l;
    }
    rim_edges[best].push_back(e);
  }
  for (std::size_t l = 0; l < electrodes.size(); ++l) {
    append_collar(mesh, electrodes[l], params, s.vertices, rim_edges[l]);
  }
  check_area(mesh);
  return mesh;
}

namespace {

std::string region_token(const BoundaryRegion& r) {
  switch (r.kind) {
    case BoundaryRegion::Kind::RobinElectrode:
      return "robin";
    case BoundaryRegion::Kind::NeumannOff:
      return "neumann";
    case BoundaryRegion::Kind::DirichletAnomaly:
      return "dirichlet_anomaly";
    case BoundaryRegion::Kind::DirichletOuter:
      return "dirichlet_outer";
  }
  return "neumann";
}

BoundaryRegion parse_region(const std::string& token, int electrode) {
  if (token == "robin") return BoundaryRegion::robin(electrode);
  if (token == "neumann") return BoundaryRegion::neumann();
  if (token == "dirichlet_anomaly") return BoundaryRegion::anomaly();
  if (token == "dirichlet_outer") return BoundaryRegion::outer_dirichlet();
  throw BemError("unknown region tag '" + token + "'");
}

}  // namespace

void save_mesh(const SurfaceMesh& mesh, std::ostream& out) {
  const MeshParams& p = mesh.params;
  out << "# pimc surface mesh\n"
      << "# params: m1 m2 m3 m4 alpha sectors r1 r2 extended_radius depth\n"
      << "# collar: number of triangles stitching the icosphere to the patches\n"
      << "# element lines: n x1 y1 z1 ... xn yn zn area region electrode (n = 3 or 4)\n"
      << std::setprecision(17);
  out << "params " << p.m1 << ' ' << p.m2 << ' ' << p.m3 << ' ' << p.m4 << ' ' << p.alpha << ' ' << p.sectors
      << ' ' << p.r1 << ' ' << p.r2 << ' ' << p.extended_radius << ' ' << p.depth << '\n';
  out << "collar " << mesh.collar_elements << '\n';
  out << "elements " << mesh.elements.size() << '\n';
  for (const MeshElement& e : mesh.elements) {
    out << e.n_vertices;
    for (int k = 0; k < e.n_vertices; ++k) {
      out << ' ' << e.vertices[k].x() << ' ' << e.vertices[k].y() << ' ' << e.vertices[k].z();
    }
    out << ' ' << e.area << ' ' << region_token(e.region) << ' ' << e.region.electrode << '\n';
  }
}

SurfaceMesh load_mesh(std::istream& in) {
  SurfaceMesh mesh;
  std::string line;
  long expected = -1;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw BemError("mesh line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string head;
    is >> head;
    if (head == "params") {
      MeshParams& p = mesh.params;
      if (!(is >> p.m1 >> p.m2 >> p.m3 >> p.m4 >> p.alpha >> p.sectors >> p.r1 >> p.r2 >> p.extended_radius >>
            p.depth)) {
        fail("malformed params line");
      }
      continue;
    }
    if (head == "collar") {
      if (!(is >> mesh.collar_elements) || mesh.collar_elements < 0) fail("malformed collar count");
      continue;
    }
    if (head == "elements") {
      if (!(is >> expected) || expected < 0) fail("malformed element count");
      mesh.elements.reserve(static_cast<std::size_t>(expected));
      continue;
    }
    int n = 0;
    try {
      n = std::stoi(head);
    } catch (const std::exception&) {
      fail("expected a corner count");
    }
    if (n != 3 && n != 4) fail("elements have three or four corners");
    std::array<Vec3, 4> v;
    for (int k = 0; k < n; ++k) {
      if (!(is >> v[k].x() >> v[k].y() >> v[k].z())) fail("truncated coordinates");
    }
    double area = 0.0;
    std::string token;
    int electrode = 0;
    if (!(is >> area >> token >> electrode)) fail("missing area, region or electrode");
    MeshElement e = n == 3 ? make_element({v[0], v[1], v[2]}, parse_region(token, electrode))
                           : make_element({v[0], v[1], v[2], v[3]}, parse_region(token, electrode));
    e.area = area;
    mesh.elements.push_back(e);
  }
  if (expected >= 0 && static_cast<long>(mesh.elements.size()) != expected) {
    throw BemError("mesh file declares " + std::to_string(expected) + " elements but holds " +
                   std::to_string(mesh.elements.size()));
  }
  return mesh;
}

}  // namespace pimc

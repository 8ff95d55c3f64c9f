#include "pimc/bem.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <cmath>

#include "pimc/parallel.hpp"
#include "pimc/quadrature.hpp"

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define PIMC_MULTIVERSION __attribute__((target_clones("avx512f", "avx2", "default")))
#else
#define PIMC_MULTIVERSION
#endif

namespace pimc {

namespace {

constexpr double kFourPi = 4.0 * kPi;

}  // namespace

GreensFunction::GreensFunction(const DomainSpec& domain) {
  if (domain.has_anomaly()) {
    if (!domain.anomaly_is_concentric()) {
      throw BemError("the reference solver needs a concentric anomaly; use the path-integral solver instead");
    }
    r0_ = domain.anomaly_radius();
  }
}

KernelValue GreensFunction::free_space(const Vec3& x, const Vec3& y) {
  const Vec3 d = x - y;
  const double r2 = d.squaredNorm();
  if (r2 < 1e-28) throw BemError("Green's function evaluated at coincident points");
  const double r = std::sqrt(r2);
  const double ny = y.norm();
  return {1.0 / (kFourPi * r), d.dot(y) / (ny * kFourPi * r2 * r)};
}

KernelValue GreensFunction::image(const Vec3& x, const Vec3& y) const {
  if (r0_ == 0.0) return {};
  // With rho = |y|: r0 / (|y| |x - y*|) = r0 / sqrt(Q), Q = |x|^2 rho^2 - 2 r0^2 x.y + r0^4.
  const double rho = y.norm();
  const double x2 = x.squaredNorm();
  const double xy = x.dot(y);
  const double r04 = r0_ * r0_ * r0_ * r0_;
  const double q = x2 * rho * rho - 2.0 * r0_ * r0_ * xy + r04;
  const double inv = 1.0 / std::sqrt(q);
  const double dq = rho * x2 - r0_ * r0_ * xy / rho;  // half of dQ/drho
  return {-r0_ * inv / kFourPi, r0_ * dq * inv * inv * inv / kFourPi};
}

KernelValue GreensFunction::operator()(const Vec3& x, const Vec3& y) const {
  if (r0_ > 0.0) {
    const double tol = r0_ * (1.0 - 1e-12);
    if (x.norm() < tol || y.norm() < tol) throw BemError("Green's function evaluated inside the anomaly");
  }
  const KernelValue f = free_space(x, y);
  const KernelValue g = image(x, y);
  return {f.value + g.value, f.normal_derivative + g.normal_derivative};
}

KernelValue greens_function(const Vec3& x, const Vec3& y, const DomainSpec& domain) {
  return GreensFunction(domain)(x, y);
}

// ---------------------------------------------------------------------------
// Element integration

namespace {

using Param = Eigen::Vector2d;

// Radial projection of the straight-sided element onto the sphere.
class ElementMap {
 public:
  explicit ElementMap(const MeshElement& e) : e_(e) {}

  Vec3 chart(const Param& p) const {
    const double s = p.x();
    const double t = p.y();
    const auto& v = e_.vertices;
    if (e_.n_vertices == 3) return v[0] + s * (v[1] - v[0]) + t * (v[2] - v[0]);
    return (1 - s) * (1 - t) * v[0] + s * (1 - t) * v[1] + s * t * v[2] + (1 - s) * t * v[3];
  }

  Vec3 point(const Param& p) const { return chart(p).normalized(); }

  // Surface point and area density with respect to ds dt.
  void evaluate(const Param& p, Vec3& y, double& jacobian) const {
    const double s = p.x();
    const double t = p.y();
    const auto& v = e_.vertices;
    Vec3 ps;
    Vec3 pt;
    if (e_.n_vertices == 3) {
      ps = v[1] - v[0];
      pt = v[2] - v[0];
    } else {
      ps = (1 - t) * (v[1] - v[0]) + t * (v[2] - v[3]);
      pt = (1 - s) * (v[3] - v[0]) + s * (v[2] - v[1]);
    }
    const Vec3 raw = chart(p);
    const double len = raw.norm();
    y = raw / len;
    const Vec3 ys = (ps - y * y.dot(ps)) / len;
    const Vec3 yt = (pt - y * y.dot(pt)) / len;
    jacobian = ys.cross(yt).norm();
  }

  Param centre() const { return e_.n_vertices == 3 ? Param(1.0 / 3.0, 1.0 / 3.0) : Param(0.5, 0.5); }

  std::vector<Param> corners() const {
    if (e_.n_vertices == 3) return {{0, 0}, {1, 0}, {0, 1}};
    return {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  }

 private:
  const MeshElement& e_;
};

struct Rule {
  std::vector<double> u, v, w;
};

// Collapsed Gauss-Legendre product rule on the triangle with apex at the
// first vertex: p = A + u (B - A) + u v (C - B), weight u.
Rule collapsed_rule(int n) {
  const QuadratureRule g = gauss_legendre(n, 0.0, 1.0);
  Rule r;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      r.u.push_back(g.nodes[i]);
      r.v.push_back(g.nodes[j]);
      r.w.push_back(g.weights[i] * g.weights[j] * g.nodes[i]);
    }
  }
  return r;
}

const Rule& regular_rule() {
  static const Rule rule = collapsed_rule(4);
  return rule;
}

const Rule& singular_rule() {
  static const Rule rule = collapsed_rule(8);
  return rule;
}

}  // namespace

Vec3 area_centroid(const MeshElement& element) {
  const ElementMap map(element);
  Vec3 moment = Vec3::Zero();
  double area = 0.0;
  auto add = [&](const Param& p, double w) {
    Vec3 y;
    double jacobian = 0.0;
    map.evaluate(p, y, jacobian);
    moment += w * jacobian * y;
    area += w * jacobian;
  };
  if (element.n_vertices == 3) {
    const Rule& r = singular_rule();
    for (std::size_t k = 0; k < r.w.size(); ++k) add(Param(r.u[k] - r.u[k] * r.v[k], r.u[k] * r.v[k]), r.w[k]);
  } else {
    const QuadratureRule g = gauss_legendre(8, 0.0, 1.0);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) add(Param(g.nodes[a], g.nodes[b]), g.weights[a] * g.weights[b]);
    }
  }
  return moment / area;
}

namespace {

constexpr double kAdmissibility = 0.5;
constexpr int kMaxDepth = 48;

class ElementIntegrator {
 public:
  ElementIntegrator(const MeshElement& e, const Vec3& x) : map_(e), x_(x) {}

  ElementIntegral self() {
    const Param c = map_.centre();
    const std::vector<Param> k = map_.corners();
    for (std::size_t i = 0; i < k.size(); ++i) apex(c, k[i], k[(i + 1) % k.size()], 0);
    return sum_;
  }

  ElementIntegral regular() {
    const std::vector<Param> k = map_.corners();
    if (k.size() == 3) {
      triangle(k[0], k[1], k[2], 0);
    } else {
      triangle(k[0], k[1], k[2], 0);
      triangle(k[0], k[2], k[3], 0);
    }
    return sum_;
  }

 private:
  void apply(const Rule& rule, const Param& a, const Param& b, const Param& c) {
    const Param ab = b - a;
    const Param bc = c - b;
    const double det = std::abs(ab.x() * (c - a).y() - ab.y() * (c - a).x());
    for (std::size_t q = 0; q < rule.w.size(); ++q) {
      const Param p = a + rule.u[q] * ab + rule.u[q] * rule.v[q] * bc;
      Vec3 y;
      double jac = 0.0;
      map_.evaluate(p, y, jac);
      const Vec3 d = x_ - y;
      const double r2 = d.squaredNorm();
      const double r = std::sqrt(r2);
      const double w = rule.w[q] * det * jac;
      sum_.single += w / (kFourPi * r);
      sum_.dbl += w * d.dot(y) / (kFourPi * r2 * r);
    }
  }

  // Triangle a, b, c in parameter space whose closure avoids x.
  void triangle(const Param& a, const Param& b, const Param& c, int depth) {
    const Vec3 ya = map_.point(a);
    const Vec3 yb = map_.point(b);
    const Vec3 yc = map_.point(c);
    const double ab = (ya - yb).norm();
    const double bc = (yb - yc).norm();
    const double ca = (yc - ya).norm();
    const double diam = std::max({ab, bc, ca});
    const double dist = (x_ - (ya + yb + yc) / 3.0).norm();
    if (diam <= kAdmissibility * dist || depth >= kMaxDepth) {
      apply(regular_rule(), a, b, c);
      return;
    }
    if (ab >= bc && ab >= ca) {
      const Param m = 0.5 * (a + b);
      triangle(a, m, c, depth + 1);
      triangle(m, b, c, depth + 1);
    } else if (bc >= ca) {
      const Param m = 0.5 * (b + c);
      triangle(a, b, m, depth + 1);
      triangle(a, m, c, depth + 1);
    } else {
      const Param m = 0.5 * (c + a);
      triangle(a, b, m, depth + 1);
      triangle(m, b, c, depth + 1);
    }
  }

  // Triangle with x at the apex: the Duffy-type rule removes the 1/r
  // singularity; wide apex triangles are split along the opposite edge.
  void apex(const Param& a, const Param& b, const Param& c, int depth) {
    const Vec3 yb = map_.point(b);
    const Vec3 yc = map_.point(c);
    const Vec3 edge = yc - yb;
    const double len = edge.norm();
    const double t = std::clamp((x_ - yb).dot(edge) / (len * len), 0.0, 1.0);
    const double height = (x_ - (yb + t * edge)).norm();
    if (len <= 1.5 * height || depth >= kMaxDepth) {
      apply(singular_rule(), a, b, c);
      return;
    }
    const Param m = 0.5 * (b + c);
    apex(a, b, m, depth + 1);
    apex(a, m, c, depth + 1);
  }

  ElementMap map_;
  Vec3 x_;
  ElementIntegral sum_;
};

}  // namespace

ElementIntegral integrate_element(const MeshElement& element, const Vec3& x, bool self) {
  ElementIntegrator integrator(element, x);
  return self ? integrator.self() : integrator.regular();
}

// ---------------------------------------------------------------------------
// Far field

namespace {

struct Soa {
  const double* x;
  const double* y;
  const double* z;
  const double* wa;  // double-layer density times area
  const double* wb;  // single-layer density times area
};

// Sum over j in [begin, end) of the one-point free-space rule. Sources sit at
// element area centroids, just inside the sphere. For x and y on the unit
// sphere (x - y).y = -|x - y|^2 / 2, so the double layer is -1/(2r); that form
// stays accurate off the surface while (x - y).y / r^3 varies sharply across it.
PIMC_MULTIVERSION
double free_space_sum(double xi, double yi, double zi, const double* px, const double* py, const double* pz,
                      const double* wa, const double* wb, std::size_t begin, std::size_t end) {
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t j = begin; j < end; ++j) {
    const double dx = xi - px[j];
    const double dy = yi - py[j];
    const double dz = zi - pz[j];
    sum += (wb[j] - 0.5 * wa[j]) / std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum;
}

// Image part, exact for target and source on the unit sphere: with c = x.y,
// G = -r0 / sqrt(Q), dG/dn = r0 (1 - r0^2 c) / Q^(3/2), Q = 1 - 2 r0^2 c + r0^4.
PIMC_MULTIVERSION
double image_sum(double xi, double yi, double zi, const double* px, const double* py, const double* pz,
                 const double* wa, const double* wb, std::size_t n, double r0) {
  const double r02 = r0 * r0;
  const double q0 = 1.0 + r02 * r02;
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (std::size_t j = 0; j < n; ++j) {
    const double c = xi * px[j] + yi * py[j] + zi * pz[j];
    const double q = q0 - 2.0 * r02 * c;
    const double inv = 1.0 / std::sqrt(q);
    sum += r0 * (wa[j] * (1.0 - r02 * c) * inv * inv * inv - wb[j] * inv);
  }
  return sum;
}

// One-point rule for a single pair, matching free_space_sum term by term.
KernelValue point_rule(const Vec3& x, const Vec3& y) {
  const Vec3 d = x - y;
  const double r2 = d.squaredNorm();
  const double inv = 1.0 / std::sqrt(r2);
  return {inv / kFourPi, -0.5 * inv / kFourPi};
}

// Uniform bucket grid over [-1, 1]^3 for the near-pair search.
class BucketGrid {
 public:
  BucketGrid(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& z,
             double cell)
      : cell_(cell), n_(std::max(1, static_cast<int>(std::ceil(2.2 / cell)))) {
    std::vector<int> count(static_cast<std::size_t>(n_) * n_ * n_ + 1, 0);
    std::vector<int> key(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      key[i] = index(coord(x[i]), coord(y[i]), coord(z[i]));
      ++count[static_cast<std::size_t>(key[i]) + 1];
    }
    for (std::size_t k = 1; k < count.size(); ++k) count[k] += count[k - 1];
    start_ = count;
    items_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) items_[static_cast<std::size_t>(count[key[i]]++)] = static_cast<int>(i);
  }

  template <typename Fn>
  void visit(const Vec3& c, double radius, Fn&& fn) const {
    const int lo[3] = {coord(c.x() - radius), coord(c.y() - radius), coord(c.z() - radius)};
    const int hi[3] = {coord(c.x() + radius), coord(c.y() + radius), coord(c.z() + radius)};
    for (int a = lo[0]; a <= hi[0]; ++a) {
      for (int b = lo[1]; b <= hi[1]; ++b) {
        for (int d = lo[2]; d <= hi[2]; ++d) {
          const int k = index(a, b, d);
          for (int s = start_[static_cast<std::size_t>(k)]; s < start_[static_cast<std::size_t>(k) + 1]; ++s) {
            fn(items_[static_cast<std::size_t>(s)]);
          }
        }
      }
    }
  }

 private:
  int coord(double v) const { return std::clamp(static_cast<int>((v + 1.1) / cell_), 0, n_ - 1); }
  int index(int a, int b, int c) const { return (a * n_ + b) * n_ + c; }

  double cell_;
  int n_;
  std::vector<int> start_;
  std::vector<int> items_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Operator

BemOperator::BemOperator(const SurfaceMesh& mesh, const DomainSpec& domain, const BoundaryData& data, BemMode mode,
                         const BemOptions& options)
    : mode_(mode), options_(options) {
  const std::size_t n = mesh.size();
  if (n == 0) throw BemError("empty surface mesh");
  if (!(options.near_factor > 0.0)) throw BemError("near_factor must be > 0");
  data.validate(domain);
  r0_ = GreensFunction(domain).anomaly_radius();

  x_.resize(n);
  y_.resize(n);
  z_.resize(n);
  area_.resize(n);
  sx_.resize(n);
  sy_.resize(n);
  sz_.resize(n);
  kappa_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> diameter(n);
  for (std::size_t j = 0; j < n; ++j) {
    const MeshElement& e = mesh.elements[j];
    x_[j] = e.centroid.x();
    y_[j] = e.centroid.y();
    z_[j] = e.centroid.z();
    const Vec3 source = area_centroid(e);
    sx_[j] = source.x();
    sy_[j] = source.y();
    sz_[j] = source.z();
    area_[j] = e.area;
    diameter[j] = e.diameter();
    const auto kind = e.region.kind;
    if (mode == BemMode::Robin) {
      if (domain.outer_condition() != OuterCondition::Reflecting) {
        throw BemError("Robin mode needs a reflecting outer sphere");
      }
      if (kind == BoundaryRegion::Kind::RobinElectrode) {
        kappa_[static_cast<Eigen::Index>(j)] = data.kappa(e.region.electrode);
      } else if (kind != BoundaryRegion::Kind::NeumannOff) {
        throw BemError("Robin mode accepts only electrode and insulating elements");
      }
    } else if (kind != BoundaryRegion::Kind::DirichletOuter) {
      throw BemError("Dirichlet mode needs every element tagged DirichletOuter");
    }
  }

  // Near pairs (target i, source j): |x_i - y_j| < near_factor * diam_j.
  std::vector<double> reach(n);
  for (std::size_t j = 0; j < n; ++j) reach[j] = options.near_factor * diameter[j];
  std::vector<double> sorted = reach;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(n / 2), sorted.end());
  const double cell = std::clamp(sorted[n / 2], 0.005, 0.5);
  const BucketGrid grid(x_, y_, z_, cell);

  using Triplet = Eigen::Triplet<double>;
  std::vector<std::vector<Triplet>> single_parts(n);
  std::vector<std::vector<Triplet>> double_parts(n);
  parallel_for(n, options.workers, [&](std::size_t j) {
    const MeshElement& e = mesh.elements[j];
    const Vec3 yj = e.centroid;
    const Vec3 sj(sx_[j], sy_[j], sz_[j]);
    grid.visit(yj, reach[j], [&](int target) {
      const std::size_t i = static_cast<std::size_t>(target);
      const Vec3 xi(x_[i], y_[i], z_[i]);
      if (i != j && (xi - yj).norm() >= reach[j]) return;
      const ElementIntegral exact = integrate_element(e, xi, i == j);
      KernelValue approx;
      if (i != j) {
        approx = point_rule(xi, sj);
        approx.value *= area_[j];
        approx.normal_derivative *= area_[j];
      }
      single_parts[j].emplace_back(target, static_cast<int>(j), exact.single - approx.value);
      double_parts[j].emplace_back(target, static_cast<int>(j), exact.dbl - approx.normal_derivative);
    });
  });
  std::vector<Triplet> single;
  std::vector<Triplet> dbl;
  for (std::size_t j = 0; j < n; ++j) {
    single.insert(single.end(), single_parts[j].begin(), single_parts[j].end());
    dbl.insert(dbl.end(), double_parts[j].begin(), double_parts[j].end());
    std::vector<Triplet>().swap(single_parts[j]);
    std::vector<Triplet>().swap(double_parts[j]);
  }
  const auto size = static_cast<Eigen::Index>(n);
  single_near_.resize(size, size);
  double_near_.resize(size, size);
  single_near_.setFromTriplets(single.begin(), single.end());
  double_near_.setFromTriplets(dbl.begin(), dbl.end());

  Eigen::VectorXd known(size);
  if (mode == BemMode::Robin) {
    for (std::size_t j = 0; j < n; ++j) {
      const MeshElement& e = mesh.elements[j];
      known[static_cast<Eigen::Index>(j)] =
          e.region.kind == BoundaryRegion::Kind::RobinElectrode
              ? data.kappa(e.region.electrode) * data.phi1(e.region.electrode, e.centroid)
              : data.phi2(e.centroid);
    }
    rhs_ = layer_potentials(Eigen::VectorXd::Zero(size), known);
  } else {
    for (std::size_t j = 0; j < n; ++j) known[static_cast<Eigen::Index>(j)] = data.phi3(mesh.elements[j].centroid);
    rhs_ = 0.5 * known + layer_potentials(known, Eigen::VectorXd::Zero(size));
  }
}

void BemOperator::far_field(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool with_image,
                            Eigen::VectorXd& out) const {
  const std::size_t n = x_.size();
  std::vector<double> wa(n);
  std::vector<double> wb(n);
  for (std::size_t j = 0; j < n; ++j) {
    wa[j] = a[static_cast<Eigen::Index>(j)] * area_[j];
    wb[j] = b[static_cast<Eigen::Index>(j)] * area_[j];
  }
  out.resize(static_cast<Eigen::Index>(n));
  const bool image = with_image && r0_ > 0.0;
  constexpr std::size_t kRowsPerTask = 64;
  const std::size_t tasks = (n + kRowsPerTask - 1) / kRowsPerTask;
  parallel_for(tasks, options_.workers, [&](std::size_t task) {
    const std::size_t last = std::min(n, (task + 1) * kRowsPerTask);
    for (std::size_t i = task * kRowsPerTask; i < last; ++i) {
      double s = free_space_sum(x_[i], y_[i], z_[i], sx_.data(), sy_.data(), sz_.data(), wa.data(), wb.data(), 0, i) +
                 free_space_sum(x_[i], y_[i], z_[i], sx_.data(), sy_.data(), sz_.data(), wa.data(), wb.data(), i + 1,
                                n);
      if (image) s += image_sum(x_[i], y_[i], z_[i], sx_.data(), sy_.data(), sz_.data(), wa.data(), wb.data(), n, r0_);
      out[static_cast<Eigen::Index>(i)] = s / kFourPi;
    }
  });
}

Eigen::VectorXd BemOperator::layer_potentials(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  Eigen::VectorXd out;
  far_field(a, b, true, out);
  out += double_near_ * a;
  out += single_near_ * b;
  return out;
}

Eigen::VectorXd BemOperator::apply(const Eigen::VectorXd& v) const {
  if (mode_ == BemMode::Robin) return 0.5 * v + layer_potentials(v, kappa_.cwiseProduct(v));
  return layer_potentials(Eigen::VectorXd::Zero(v.size()), v);
}

Eigen::VectorXd BemOperator::double_layer_row_sums() const {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(size());
  Eigen::VectorXd out;
  far_field(ones, Eigen::VectorXd::Zero(size()), false, out);
  out += double_near_ * ones;
  return out;
}

Eigen::MatrixXd BemOperator::dense() const {
  const Eigen::Index n = size();
  if (n > 20000) throw BemError("system too large for a dense matrix");
  Eigen::MatrixXd m(n, n);
  const bool robin = mode_ == BemMode::Robin;
  const double r02 = r0_ * r0_;
  parallel_for(static_cast<std::size_t>(n), options_.workers, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    const Vec3 xi(x_[row], y_[row], z_[row]);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto col = static_cast<std::size_t>(j);
      const Vec3 yj(sx_[col], sy_[col], sz_[col]);
      double s = 0.0;
      double d = 0.0;
      if (j != i) {
        const KernelValue k = point_rule(xi, yj);
        s = k.value;
        d = k.normal_derivative;
      }
      if (r0_ > 0.0) {
        const double c = xi.dot(yj);
        const double q = 1.0 + r02 * r02 - 2.0 * r02 * c;
        const double inv = 1.0 / std::sqrt(q);
        s -= r0_ * inv / kFourPi;
        d += r0_ * (1.0 - r02 * c) * inv * inv * inv / kFourPi;
      }
      s *= area_[col];
      d *= area_[col];
      m(i, j) = robin ? d + kappa_[j] * s : s;
    }
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    for (decltype(single_near_)::InnerIterator it(single_near_, i); it; ++it) {
      m(i, it.col()) += robin ? kappa_[it.col()] * it.value() : it.value();
    }
    if (robin) {
      for (decltype(double_near_)::InnerIterator it(double_near_, i); it; ++it) m(i, it.col()) += it.value();
      m(i, i) += 0.5;
    }
  }
  return m;
}

}  // namespace pimc

// ---------------------------------------------------------------------------
// Matrix-free adaptor for Eigen's GMRES.

namespace pimc::detail {
class OperatorRef;
}

namespace Eigen::internal {
template <>
struct traits<pimc::detail::OperatorRef> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace pimc::detail {

class OperatorRef : public Eigen::EigenBase<OperatorRef> {
 public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  explicit OperatorRef(const BemOperator& op) : op_(&op) {}
  Eigen::Index rows() const { return op_->size(); }
  Eigen::Index cols() const { return op_->size(); }

  template <typename Rhs>
  Eigen::Product<OperatorRef, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<OperatorRef, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }

  const BemOperator& op() const { return *op_; }

 private:
  const BemOperator* op_;
};

}  // namespace pimc::detail

namespace Eigen::internal {
template <typename Rhs>
struct generic_product_impl<pimc::detail::OperatorRef, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<pimc::detail::OperatorRef, Rhs,
                                generic_product_impl<pimc::detail::OperatorRef, Rhs>> {
  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const pimc::detail::OperatorRef& lhs, const Rhs& rhs, const double& alpha) {
    dst.noalias() += alpha * lhs.op().apply(rhs);
  }
};
}  // namespace Eigen::internal

namespace pimc {

BemSolution solve(const BemOperator& op, const SurfaceMesh& mesh, const BoundaryData& data) {
  const Eigen::Index n = op.size();
  if (static_cast<std::size_t>(n) != mesh.size()) throw BemError("operator and mesh sizes differ");
  const Eigen::VectorXd& b = op.rhs();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  BemSolution out;
  out.mode = op.mode();
  const double b_norm = b.norm();

  if (b_norm > 0.0) {
    const BemOptions& opt = op.options();
    if (n <= opt.dense_limit) {
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(op.dense());
      if (!(lu.rcond() > 1e-13)) throw BemError("boundary element matrix is numerically singular");
      x = lu.solve(b);
      out.dense = true;
    } else {
      detail::OperatorRef ref(op);
      Eigen::GMRES<detail::OperatorRef, Eigen::IdentityPreconditioner> gmres;
      gmres.set_restart(opt.gmres_restart);
      gmres.setTolerance(opt.gmres_tolerance);
      gmres.setMaxIterations(opt.max_iterations);
      gmres.compute(ref);
      x = gmres.solve(b);
      out.iterations = static_cast<int>(gmres.iterations());
      if (gmres.info() != Eigen::Success) {
        throw BemError("GMRES did not converge (relative residual " + std::to_string(gmres.error()) + ")");
      }
    }
    out.residual_norm = (op.apply(x) - b).norm() / b_norm;
  }

  if (op.mode() == BemMode::Robin) {
    out.potential = x;
    out.flux.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const MeshElement& e = mesh.elements[static_cast<std::size_t>(j)];
      out.flux[j] = e.region.kind == BoundaryRegion::Kind::RobinElectrode
                        ? data.kappa(e.region.electrode) * (data.phi1(e.region.electrode, e.centroid) - x[j])
                        : data.phi2(e.centroid);
    }
  } else {
    out.flux = x;
    out.potential.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      out.potential[j] = data.phi3(mesh.elements[static_cast<std::size_t>(j)].centroid);
    }
  }
  return out;
}

ReferenceSolution reference_currents(const BemSolution& solution, const SurfaceMesh& mesh,
                                     const DomainSpec& domain) {
  ReferenceSolution out;
  for (const Electrode& e : domain.electrodes()) {
    double area = 0.0;
    double flux = 0.0;
    for (std::size_t j = 0; j < mesh.size(); ++j) {
      const MeshElement& el = mesh.elements[j];
      if (el.region != BoundaryRegion::robin(e.id)) continue;
      area += el.area;
      flux += el.area * solution.flux[static_cast<Eigen::Index>(j)];
    }
    if (!(area > 0.0)) throw BemError("electrode " + std::to_string(e.id) + " has no mesh elements");
    out.electrode_ids.push_back(e.id);
    out.areas.push_back(area);
    out.currents.push_back(flux / area);
    out.total += flux / area;
  }
  return out;
}

InteriorPotential interior_potential(const Vec3& x, const BemSolution& solution, const SurfaceMesh& mesh,
                                     const DomainSpec& domain, const BemOptions& options) {
  if (!domain.contains(x)) throw GeometryError("interior_potential needs a point strictly inside the domain");
  const GreensFunction green(domain);
  InteriorPotential out;
  double sum = 0.0;
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    const MeshElement& e = mesh.elements[j];
    const double diam = e.diameter();
    const double dist = (x - e.centroid).norm();
    if (dist < diam) out.near_boundary = true;
    double s = 0.0;
    double d = 0.0;
    if (dist < options.near_factor * diam) {
      const ElementIntegral exact = integrate_element(e, x, false);
      s = exact.single;
      d = exact.dbl;
    } else {
      const KernelValue k = GreensFunction::free_space(x, area_centroid(e));
      s = k.value * e.area;
      d = k.normal_derivative * e.area;
    }
    const KernelValue img = green.image(x, area_centroid(e));
    s += img.value * e.area;
    d += img.normal_derivative * e.area;
    const auto jj = static_cast<Eigen::Index>(j);
    sum += s * solution.flux[jj] - d * solution.potential[jj];
  }
  out.value = sum;
  return out;
}

}  // namespace pimc

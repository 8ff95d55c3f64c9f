#pragma once

#include "pimc/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pimc {

/// Mesh defects, unsupported configurations and solver failures of the
/// boundary element reference.
class BemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Layered electrode mesh: four ring layers between the centre and the
/// extended radius, m1..m4 rings each, `sectors` divisions in azimuth, plus
/// the subdivision depth of the icosphere that covers the rest of the sphere.
struct MeshParams {
  int m1 = 20;
  int m2 = 16;
  int m3 = 16;
  int m4 = 9;
  double alpha = 0.75;
  int sectors = 120;
  double r1 = 0.12;
  double r2 = 0.26;
  double extended_radius = 0.3;
  int depth = 5;

  /// `rim` is the electrode cap radius r, which must satisfy r1 < r < r2 < r_e.
  void validate(double rim) const;
};

/// Triangle or quadrilateral whose straight-sided preimage is projected
/// radially onto the unit sphere. `centroid` is the projected parametric
/// centre and doubles as the collocation point.
struct MeshElement {
  std::array<Vec3, 4> vertices{};
  int n_vertices = 3;
  Vec3 centroid = Vec3::Zero();
  double area = 0.0;
  BoundaryRegion region;

  double diameter() const;
};

MeshElement make_element(std::initializer_list<Vec3> vertices, BoundaryRegion region);

/// Exact area of the spherical polygon with the given unit-vector corners.
double spherical_polygon_area(const MeshElement& element);

struct SurfaceMesh {
  std::vector<MeshElement> elements;
  MeshParams params;
  /// Triangles stitching the icosphere to the electrode patch rims.
  int collar_elements = 0;

  std::size_t size() const { return elements.size(); }
  double total_area() const;
  /// Summed area of the elements tagged as electrode `id`.
  double electrode_area(int id) const;
};

/// Geodesic ring radii 0 = rho_0 < ... < rho_M = r_e of an electrode patch.
std::vector<double> ring_radii(double rim, const MeshParams& params);

/// Rings of quads (triangles around the centre) on the extended cap of
/// `electrode`; rings inside the cap are tagged with the electrode.
SurfaceMesh build_graded_electrode_mesh(const Electrode& electrode, const MeshParams& params);

/// Recursively subdivided icosahedron, all elements NeumannOff.
SurfaceMesh build_icosphere(int depth);

/// Electrode patches plus the icosphere with a hole around every extended
/// cap, closed by a collar of triangles that shares the patch rim vertices,
/// so the elements tile the sphere without gaps. For an absorbing domain the
/// plain icosphere tagged DirichletOuter is returned, and a single electrode
/// covering the whole sphere gets the plain icosphere tagged with that
/// electrode.
SurfaceMesh build_global_mesh(const DomainSpec& domain, const MeshParams& params);

void save_mesh(const SurfaceMesh& mesh, std::ostream& out);
SurfaceMesh load_mesh(std::istream& in);

struct KernelValue {
  double value = 0.0;
  double normal_derivative = 0.0;  // along y/|y|
};

/// Green's function of the unit ball outside the (concentric) anomaly and its
/// derivative in y along y/|y|. Without an anomaly this is the free-space
/// kernel 1/(4 pi |x - y|).
class GreensFunction {
 public:
  explicit GreensFunction(const DomainSpec& domain);

  KernelValue operator()(const Vec3& x, const Vec3& y) const;
  /// Free-space part only.
  static KernelValue free_space(const Vec3& x, const Vec3& y);
  /// Image correction only; zero without an anomaly.
  KernelValue image(const Vec3& x, const Vec3& y) const;

  double anomaly_radius() const { return r0_; }

 private:
  double r0_ = 0.0;
};

KernelValue greens_function(const Vec3& x, const Vec3& y, const DomainSpec& domain);

/// Integrals of the free-space kernel and its normal derivative over one
/// curved element, accurate for targets on or near the element.
struct ElementIntegral {
  double single = 0.0;
  double dbl = 0.0;
};

/// Mean of y over the curved element; lies slightly inside the sphere.
Vec3 area_centroid(const MeshElement& element);

/// `self` means x is the element's own collocation point.
ElementIntegral integrate_element(const MeshElement& element, const Vec3& x, bool self);

/// Robin mode: unknown u on every element of a reflecting domain.
/// Dirichlet mode: u = phi3 is known everywhere and the unknown is du/dn.
enum class BemMode { Robin, Dirichlet };

struct BemOptions {
  /// Source elements closer than near_factor times their diameter are
  /// integrated adaptively; the rest use the one-point rule.
  double near_factor = 4.0;
  /// Systems up to this size are solved by dense LU, larger ones by GMRES.
  long dense_limit = 6000;
  double gmres_tolerance = 1e-10;
  int gmres_restart = 80;
  int max_iterations = 1000;
  unsigned workers = 0;
};

/// The collocation operator of the boundary integral equation. Applied
/// without ever forming the full matrix: a one-point rule for distant pairs
/// plus a sparse table of corrections for near pairs.
class BemOperator {
 public:
  BemOperator(const SurfaceMesh& mesh, const DomainSpec& domain, const BoundaryData& data, BemMode mode,
              const BemOptions& options = {});

  Eigen::Index size() const { return static_cast<Eigen::Index>(x_.size()); }
  BemMode mode() const { return mode_; }
  const BemOptions& options() const { return options_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }

  /// Sum_j D_ij a_j + S_ij b_j with the discrete double- and single-layer
  /// operators (image correction included).
  Eigen::VectorXd layer_potentials(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dense() const;

  /// Row sums of the free-space double-layer operator; these tend to -1/2.
  Eigen::VectorXd double_layer_row_sums() const;

  std::size_t near_pairs() const { return static_cast<std::size_t>(single_near_.nonZeros()); }
  const Eigen::VectorXd& kappa() const { return kappa_; }

 private:
  void far_field(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool with_image,
                 Eigen::VectorXd& out) const;

  BemMode mode_;
  BemOptions options_;
  double r0_ = 0.0;
  std::vector<double> x_, y_, z_, area_;
  std::vector<double> sx_, sy_, sz_;  // far-field source points
  Eigen::VectorXd kappa_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> single_near_, double_near_;
  Eigen::VectorXd rhs_;
};

struct BemSolution {
  BemMode mode = BemMode::Robin;
  Eigen::VectorXd potential;  // u per element
  Eigen::VectorXd flux;       // du/dn per element, outward
  double residual_norm = 0.0;  // relative, ||A x - b|| / ||b||
  int iterations = 0;          // 0 for the dense solve
  bool dense = false;
};

/// Dense LU up to options.dense_limit unknowns, restarted GMRES beyond.
BemSolution solve(const BemOperator& op, const SurfaceMesh& mesh, const BoundaryData& data);

struct ReferenceSolution {
  std::vector<int> electrode_ids;
  std::vector<double> currents;
  std::vector<double> areas;
  double total = 0.0;
};

/// Mean outward flux over each electrode.
ReferenceSolution reference_currents(const BemSolution& solution, const SurfaceMesh& mesh,
                                     const DomainSpec& domain);

struct InteriorPotential {
  double value = 0.0;
  /// x is within one element diameter of the boundary, where the quadrature
  /// loses accuracy.
  bool near_boundary = false;
};

InteriorPotential interior_potential(const Vec3& x, const BemSolution& solution, const SurfaceMesh& mesh,
                                     const DomainSpec& domain, const BemOptions& options = {});

}  // namespace pimc

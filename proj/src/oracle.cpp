#include "pimc/oracle.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace pimc {

Polynomial::Polynomial(std::map<Exponents, double> terms) : terms_(std::move(terms)) {
  std::erase_if(terms_, [](const auto& kv) { return kv.second == 0.0; });
}

namespace {

class PolynomialParser {
 public:
  explicit PolynomialParser(std::string text) : text_(std::move(text)) {}

  std::map<Polynomial::Exponents, double> parse() {
    std::map<Polynomial::Exponents, double> terms;
    skip_space();
    if (at_end()) fail("empty polynomial");
    bool first = true;
    while (!at_end()) {
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = get() == '-' ? -1.0 : 1.0;
        skip_space();
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      auto [coef, exps] = term();
      terms[exps] += sign * coef;
      first = false;
      skip_space();
    }
    return terms;
  }

 private:
  std::pair<double, Polynomial::Exponents> term() {
    double coef = 1.0;
    Polynomial::Exponents exps{0, 0, 0};
    bool any = false;
    for (;;) {
      skip_space();
      if (at_end()) break;
      const char c = peek();
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        coef *= std::stod(text_.substr(pos_), &used);
        pos_ += used;
      } else if (c == 'x' || c == 'y' || c == 'z') {
        get();
        int power = 1;
        skip_space();
        if (!at_end() && peek() == '^') {
          get();
          skip_space();
          std::size_t used = 0;
          power = std::stoi(text_.substr(pos_), &used);
          pos_ += used;
          if (power < 0) fail("negative exponent");
        }
        exps[static_cast<std::size_t>(c - 'x')] += power;
      } else {
        break;
      }
      any = true;
      skip_space();
      if (!at_end() && peek() == '*') get();
    }
    if (!any) fail("expected a term");
    return {coef, exps};
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  char get() { return text_[pos_++]; }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw OracleError("cannot parse polynomial '" + text_ + "': " + what);
  }

  std::string text_;
  std::size_t pos_ = 0;
};

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

Polynomial Polynomial::parse(const std::string& text) {
  try {
    return Polynomial(PolynomialParser(text).parse());
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const OracleError*>(&e)) throw;
    throw OracleError("cannot parse polynomial '" + text + "'");
  }
}

double Polynomial::operator()(const Vec3& p) const {
  double sum = 0.0;
  for (const auto& [e, c] : terms_) sum += c * ipow(p.x(), e[0]) * ipow(p.y(), e[1]) * ipow(p.z(), e[2]);
  return sum;
}

Vec3 Polynomial::gradient(const Vec3& p) const {
  Vec3 g = Vec3::Zero();
  for (const auto& [e, c] : terms_) {
    for (int axis = 0; axis < 3; ++axis) {
      if (e[axis] == 0) continue;
      Exponents d = e;
      d[axis] -= 1;
      g[axis] += c * e[axis] * ipow(p.x(), d[0]) * ipow(p.y(), d[1]) * ipow(p.z(), d[2]);
    }
  }
  return g;
}

Polynomial Polynomial::laplacian() const {
  std::map<Exponents, double> out;
  for (const auto& [e, c] : terms_) {
    for (int axis = 0; axis < 3; ++axis) {
      if (e[axis] < 2) continue;
      Exponents d = e;
      d[axis] -= 2;
      out[d] += c * e[axis] * (e[axis] - 1);
    }
  }
  return Polynomial(std::move(out));
}

int Polynomial::degree() const {
  int deg = 0;
  for (const auto& [e, c] : terms_) deg = std::max(deg, e[0] + e[1] + e[2]);
  return deg;
}

bool Polynomial::is_zero(double tol) const {
  for (const auto& [e, c] : terms_) {
    if (std::abs(c) > tol) return false;
  }
  return true;
}

bool Polynomial::is_homogeneous() const {
  const int deg = degree();
  for (const auto& [e, c] : terms_) {
    if (e[0] + e[1] + e[2] != deg) return false;
  }
  return true;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    os << (c < 0 ? (first ? "-" : " - ") : (first ? "" : " + "));
    const double a = std::abs(c);
    const bool has_var = e[0] + e[1] + e[2] > 0;
    if (a != 1.0 || !has_var) os << a;
    bool need_star = a != 1.0;
    for (int axis = 0; axis < 3; ++axis) {
      if (e[axis] == 0) continue;
      if (need_star) os << '*';
      os << static_cast<char>('x' + axis);
      if (e[axis] > 1) os << '^' << e[axis];
      need_star = true;
    }
    first = false;
  }
  return os.str();
}

namespace {

void require_harmonic(const Polynomial& p) {
  if (p.degree() > 4) throw OracleError("harmonic oracles support degree <= 4, got " + p.to_string());
  if (!p.laplacian().is_zero(1e-12)) throw OracleError("polynomial is not harmonic: " + p.to_string());
}

}  // namespace

OracleCase dirichlet_polynomial_case(const Polynomial& p) {
  require_harmonic(p);
  DomainSpec domain = DomainSpec::unit_ball(OuterCondition::Absorbing);
  BoundaryData data = BoundaryData::zero(domain);
  data.phi3 = [p](const Vec3& y) { return p(y); };
  return {"dirichlet:" + p.to_string(), domain, data, [p](const Vec3& x) { return p(x); },
          [p](const Vec3& y) { return p.gradient(y).dot(y.normalized()); }};
}

Polynomial solid_harmonic(int degree) {
  switch (degree) {
    case 0:
      return Polynomial::parse("1");
    case 1:
      return Polynomial::parse("z");
    case 2:
      return Polynomial::parse("x^2 - y^2");
    case 3:
      return Polynomial::parse("x*y*z");
    case 4:
      return Polynomial::parse("x^4 - 6*x^2*y^2 + y^4");
    default:
      throw OracleError("solid harmonics are provided for degree 0..4");
  }
}

OracleCase robin_sphere_case(const Polynomial& harmonic, double kappa) {
  require_harmonic(harmonic);
  if (!harmonic.is_homogeneous()) throw OracleError("Robin oracle needs a homogeneous harmonic");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw OracleError("Robin coefficient must be > 0");
  const double z = 1.0 / kappa;
  const int n = harmonic.degree();
  Electrode whole;
  whole.id = 1;
  whole.center = Vec3::UnitZ();
  whole.cap_radius = kPi;
  whole.contact_impedance = z;
  DomainSpec domain(Vec3::Zero(), 0.0, {whole});
  BoundaryData data = BoundaryData::zero(domain);
  const double factor = n * z + 1.0;
  data.phi1 = [harmonic, factor](int, const Vec3& y) { return factor * harmonic(y); };
  std::ostringstream name;
  name << "robin:n=" << n << ",kappa=" << kappa;
  return {name.str(), domain, data, [harmonic](const Vec3& x) { return harmonic(x); },
          [harmonic](const Vec3& y) { return harmonic.gradient(y).dot(y.normalized()); }};
}

OracleCase robin_sphere_case(int degree, double kappa) {
  return robin_sphere_case(solid_harmonic(degree), kappa);
}

OracleCase annulus_radial_case(double r0, double g) {
  if (!(r0 > 0.0) || !(r0 < 1.0)) throw OracleError("annulus inner radius must be in (0, 1)");
  DomainSpec domain(Vec3::Zero(), r0, {});
  BoundaryData data = BoundaryData::zero(domain);
  data.phi2 = [g](const Vec3&) { return g; };
  const double a = g / r0;
  const double b = -g;
  std::ostringstream name;
  name << "annulus:r0=" << r0 << ",g=" << g;
  return {name.str(), domain, data, [a, b](const Vec3& x) { return a + b / x.norm(); },
          [b, r0](const Vec3& y) {
            const double r = y.norm();
            const double du_dr = -b / (r * r);
            // Outward normal of the domain is +r on the outer sphere, -r on the inner one.
            return std::abs(r - r0) < std::abs(r - 1.0) ? -du_dr : du_dr;
          }};
}

double boundary_residual(const OracleCase& oracle, const Vec3& y) {
  const BoundaryRegion region = oracle.domain.classify_boundary_point(y);
  const double u = oracle.exact(y);
  const double flux = oracle.exact_flux(y);
  switch (region.kind) {
    case BoundaryRegion::Kind::RobinElectrode: {
      const double z = oracle.domain.electrode(region.electrode).contact_impedance;
      return z * flux + u - oracle.data.phi1(region.electrode, y);
    }
    case BoundaryRegion::Kind::NeumannOff:
      return flux - oracle.data.phi2(y);
    case BoundaryRegion::Kind::DirichletAnomaly:
    case BoundaryRegion::Kind::DirichletOuter:
      return u - oracle.data.phi3(y);
  }
  return 0.0;
}

}  // namespace pimc

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/autodiff.hpp"
#include "finsler/error.hpp"
#include "finsler/jet.hpp"
#include "finsler/metric_expr.hpp"

namespace finsler {

/// Chart domain: all of R^n or the open ball of given radius about the origin.
struct Domain {
  enum class Kind { All, Ball };

  Kind kind = Kind::All;
  double radius = 0.0;

  static Domain all() { return {}; }
  static Domain ball(double r) {
    if (!(r > 0.0)) throw ConstructionError("ball radius must be positive");
    return {Kind::Ball, r};
  }

  bool contains(std::span<const double> x) const {
    for (double v : x)
      if (!std::isfinite(v)) return false;
    if (kind == Kind::All) return true;
    double s = 0.0;
    for (double v : x) s += v * v;
    return s < radius * radius;
  }

  /// Region used for random sampling: 0.7 of the ball, or the cube [-1, 1]^n.
  double sample_extent() const { return kind == Kind::Ball ? 0.7 * radius : 1.0; }

  std::string to_string() const {
    if (kind == Kind::All) return "all";
    std::ostringstream os;
    os << "ball:" << radius;
    return os.str();
  }

  /// Intersection; balls are centred at the origin so the smaller one wins.
  friend Domain intersect(const Domain& a, const Domain& b) {
    if (a.kind == Kind::All) return b;
    if (b.kind == Kind::All) return a;
    return a.radius <= b.radius ? a : b;
  }
};

/// A Finsler function F on one chart, immutable after construction.
class FinslerStructure {
 public:
  FinslerStructure(std::string label, int dim, Domain domain, ScalarFunction f)
      : label_(std::move(label)), dim_(dim), domain_(domain), f_(std::move(f)) {
    if (dim_ < 2) throw ConstructionError("dimension must be at least 2");
  }

  const std::string& label() const noexcept { return label_; }
  int dim() const noexcept { return dim_; }
  const Domain& domain() const noexcept { return domain_; }
  const ScalarFunction& function() const noexcept { return f_; }

  void require_in_domain(const SlitPoint& p) const {
    detail::check_point(p);
    if (p.dim() != dim_) throw DomainError("point dimension does not match structure " + label_);
    if (!domain_.contains(p.x)) throw DomainError("point outside the domain of " + label_);
  }

  double operator()(std::span<const double> x, std::span<const double> y) const { return f_.real(x, y); }
  double value(const SlitPoint& p) const {
    require_in_domain(p);
    return f_.real(p.x, p.y);
  }

  /// Jets of F^2 up to `order`; the variables are x^1..x^n, y^1..y^n.
  Jet energy_jet(const SlitPoint& p, int order) const {
    require_in_domain(p);
    if (order > kMaxJetOrder) throw CapabilityError("jet order exceeds 4");
    auto [xs, ys] = detail::seed_variables(p, order);
    Jet f = f_.jet(xs, ys);
    return f * f;
  }

 private:
  std::string label_;
  int dim_;
  Domain domain_;
  ScalarFunction f_;
};

inline JetScalar eval_jet(const FinslerStructure& L, const SlitPoint& p, int order) {
  L.require_in_domain(p);
  return eval_jet(L.function(), p, order);
}

/// A field of x only, evaluable on reals and jets (matrix fields are row-major).
struct XField {
  std::function<std::vector<double>(std::span<const double>)> real;
  std::function<std::vector<Jet>(std::span<const Jet>)> jet;
  std::function<std::vector<long double>(std::span<const long double>)> extended;

  template <class Generic>
  static XField from_generic(Generic g) {
    return {[g](std::span<const double> x) { return std::vector<double>(g(x)); },
            [g](std::span<const Jet> x) { return std::vector<Jet>(g(x)); },
            [g](std::span<const long double> x) { return std::vector<long double>(g(x)); }};
  }

  template <class T>
  std::vector<T> at(std::span<const T> x) const {
    if constexpr (std::is_same_v<T, double>) return real(x);
    else if constexpr (std::is_same_v<T, long double>) return extended(x);
    else return jet(x);
  }
};

namespace detail {

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

/// Deterministic probe points for construction-time checks: origin plus a lattice.
inline std::vector<std::vector<double>> probe_points(int n, const Domain& dom) {
  std::vector<std::vector<double>> pts;
  pts.emplace_back(static_cast<std::size_t>(n), 0.0);
  const double r = dom.sample_extent();
  const double levels[] = {-0.9, -0.5, 0.3, 0.8};
  for (int k = 0; k < 32; ++k) {
    std::vector<double> x(static_cast<std::size_t>(n));
    int code = k;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = r * levels[(code + i) % 4] / std::sqrt(double(n));
      code /= 2;
    }
    if (dom.contains(x)) pts.push_back(std::move(x));
  }
  return pts;
}

/// g_ij = 1/2 d^2 F^2 / dy^i dy^j at p, from jets.
inline Eigen::MatrixXd fundamental_tensor(const FinslerStructure& L, const SlitPoint& p) {
  const int n = L.dim();
  Jet e = L.energy_jet(p, 2);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * e.partial({n + i, n + j});
  return g;
}

}  // namespace detail

/// F(x, y) = sqrt(y^T a(x) y) for a symmetric positive definite matrix field a.
inline FinslerStructure make_riemannian(int n, XField a, std::string label, Domain domain = Domain::all()) {
  for (const auto& x : detail::probe_points(n, domain)) {
    const auto m = a.real(x);
    if (m.size() != static_cast<std::size_t>(n * n)) throw ConstructionError("coefficient matrix has wrong size");
    Eigen::MatrixXd mat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double aij = m[static_cast<std::size_t>(i * n + j)], aji = m[static_cast<std::size_t>(j * n + i)];
        if (std::abs(aij - aji) > 1e-12 * (1.0 + std::abs(aij))) throw ConstructionError("coefficient matrix is not symmetric");
        mat(i, j) = aij;
      }
    if (Eigen::LLT<Eigen::MatrixXd>(mat).info() != Eigen::Success)
      throw ConstructionError("coefficient matrix is not positive definite");
  }
  auto f = [a, n](auto x, auto y) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    const std::vector<T> m = a.template at<T>(x);
    T q(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) q = q + m[static_cast<std::size_t>(i * n + j)] * y[i] * y[j];
    using std::sqrt;
    return sqrt(q);
  };
  return FinslerStructure(std::move(label), n, domain, ScalarFunction::from_generic(f));
}

/// F = alpha + b_i(x) y^i; alpha must be Riemannian and |b|_alpha < 1 on the domain.
inline FinslerStructure make_randers(const FinslerStructure& alpha, XField b, std::string label = {}) {
  const int n = alpha.dim();
  for (const auto& x : detail::probe_points(n, alpha.domain())) {
    std::vector<double> e1(static_cast<std::size_t>(n), 0.0), e2(static_cast<std::size_t>(n), 0.0);
    e1[0] = 1.0;
    e2[1] = 1.0;
    e2[0] = 0.5;
    const Eigen::MatrixXd g1 = detail::fundamental_tensor(alpha, {x, e1});
    const Eigen::MatrixXd g2 = detail::fundamental_tensor(alpha, {x, e2});
    if ((g1 - g2).norm() > 1e-9 * (1.0 + g1.norm())) throw ConstructionError("Randers base metric is not Riemannian");
    const auto bv = b.real(x);
    if (bv.size() != static_cast<std::size_t>(n)) throw ConstructionError("one-form has wrong size");
    const Eigen::VectorXd bb = Eigen::Map<const Eigen::VectorXd>(bv.data(), n);
    const double norm = std::sqrt(bb.dot(g1.ldlt().solve(bb)));
    if (!(norm < 1.0)) throw ConstructionError("Randers condition violated: |b|_alpha >= 1");
  }
  auto af = alpha.function();
  auto f = [af, b](auto x, auto y) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    T base = af.template at<T>(x, y);
    const std::vector<T> bv = b.template at<T>(x);
    for (std::size_t i = 0; i < bv.size(); ++i) base = base + bv[i] * y[i];
    return base;
  };
  if (label.empty()) label = "randers(" + alpha.label() + ")";
  return FinslerStructure(std::move(label), n, alpha.domain(), ScalarFunction::from_generic(f));
}

/// Randers structure with a constant one-form.
inline FinslerStructure make_randers(const FinslerStructure& alpha, std::vector<double> b, std::string label = {}) {
  auto field = [b](auto x) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    std::vector<T> out;
    for (double v : b) out.emplace_back(v);
    return out;
  };
  return make_randers(alpha, XField::from_generic(field), std::move(label));
}

/// Structure defined by a parsed expression.
inline FinslerStructure make_expression(const MetricExpr& expr, Domain domain, std::string label = {}) {
  auto f = [expr](auto x, auto y) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    return expr.template evaluate<T>(x, y);
  };
  if (label.empty()) label = expr.to_string();
  return FinslerStructure(std::move(label), expr.dimension(), domain, ScalarFunction::from_generic(f));
}

using BuiltinParams = std::map<std::string, double>;

/// Built-in families: euclidean, klein, funk, minkowski_quartic, sphere_chart.
///
/// klein and funk accept `radius` (the ball they live on); sphere_chart accepts
/// `radius` of the sphere (curvature 1/radius^2) in stereographic coordinates.
inline FinslerStructure make_builtin(const std::string& name, int n, const BuiltinParams& params = {}) {
  if (n < 2) throw ConstructionError("dimension must be at least 2");
  double radius = 1.0;
  for (const auto& [key, v] : params) {
    if (key != "radius") throw ConstructionError("unknown parameter '" + key + "' for builtin " + name);
    if (name == "euclidean" || name == "minkowski_quartic")
      throw ConstructionError("builtin " + name + " takes no parameters");
    if (!(v > 0.0)) throw ConstructionError("radius must be positive");
    radius = v;
  }
  const std::string label = name + "(" + std::to_string(n) + ")";

  if (name == "euclidean") {
    auto f = [](auto, auto y) {
      using std::sqrt;
      return sqrt(detail::dot(y, y));
    };
    return FinslerStructure(label, n, Domain::all(), ScalarFunction::from_generic(f));
  }
  if (name == "minkowski_quartic") {
    auto f = [](auto, auto y) {
      using T = std::remove_const_t<typename decltype(y)::value_type>;
      using std::sqrt;
      T s(0.0);
      for (const auto& v : y) s = s + (v * v) * (v * v);
      return sqrt(sqrt(s));
    };
    return FinslerStructure(label, n, Domain::all(), ScalarFunction::from_generic(f));
  }
  if (name == "klein" || name == "funk") {
    const bool funk = name == "funk";
    auto f = [radius, funk](auto x, auto y) {
      using T = std::remove_const_t<typename decltype(x)::value_type>;
      using std::sqrt;
      const double inv = 1.0 / radius;
      T xx(0.0), yy(0.0), xy(0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        xx = xx + x[i] * x[i];
        yy = yy + y[i] * y[i];
        xy = xy + x[i] * y[i];
      }
      xx = xx * (inv * inv);
      yy = yy * (inv * inv);
      xy = xy * (inv * inv);
      const T denom = 1.0 - xx;
      const T root = sqrt(yy * denom + xy * xy);
      return funk ? (root + xy) / denom : root / denom;
    };
    return FinslerStructure(label, n, Domain::ball(radius), ScalarFunction::from_generic(f));
  }
  if (name == "sphere_chart") {
    auto a = [radius](auto x) {
      using T = std::remove_const_t<typename decltype(x)::value_type>;
      const std::size_t n = x.size();
      T xx(0.0);
      for (const auto& v : x) xx = xx + v * v;
      const T s = 1.0 + xx;
      const T c = (4.0 * radius * radius) / (s * s);
      std::vector<T> m(n * n, T(0.0));
      for (std::size_t i = 0; i < n; ++i) m[i * n + i] = c;
      return m;
    };
    return make_riemannian(n, XField::from_generic(a), label);
  }
  throw ConstructionError("unknown builtin '" + name + "'");
}

}  // namespace finsler

#pragma once

// Check catalogue for a structure pair (L, L*).
//
// Every identity is evaluated at shared seeded sample points on all basis
// arguments plus three random argument tuples; the residual is the largest
// componentwise difference. Implications are gated: when the hypothesis
// residual exceeds its tier the check is skipped, and a violated conclusion
// of a logical equivalence sets the residual to infinity.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler/cartan.hpp"
#include "finsler/comparison.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/error.hpp"
#include "finsler/sampling.hpp"
#include "finsler/structure.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

enum class Verdict { Pass, Fail, Skipped };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Skipped: return "skipped";
  }
  return "?";
}

inline constexpr double kJetTier = 1e-8;
inline constexpr double kSingleFdTier = 1e-4;
inline constexpr double kDoubleFdTier = 1e-3;
/// "vanishes" for classification verdicts inside implication checks
inline constexpr double kClassifyThreshold = 1e-6;

struct CheckResult {
  std::string id;
  std::string statement;
  std::string suite;
  std::string tier;
  int samples = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::Pass;
  std::string reason;  // set for skipped and failed-with-error entries
  std::vector<std::pair<std::string, double>> details;
};

struct CheckInfo {
  std::string_view id;
  std::string_view suite;
  std::string_view tier;
  double tolerance;
  std::string_view statement;
  bool sanity = false;
};

/// Catalogue in report order.
inline const std::vector<CheckInfo>& catalogue() {
  static const std::vector<CheckInfo> list = {
      {"L2.1", "connection", "jet", kJetTier, "A(X,η) = 0"},
      {"L2.2", "connection", "jet", kJetTier, "K* = K + N∘ρ"},
      {"P2.1", "connection", "jet", 1e-7, "K*(βX) = 0 for all X ⇔ N = 0"},
      {"P2.2", "connection", "jet", kJetTier, "β* = β − γ∘N"},
      {"P2.3a", "connection", "single-fd", 1e-6, "T*(X,Y) = T(X,Y) + A(X,Y)"},
      {"P2.3b", "connection", "jet", 1e-6, "T*(N(X),Y) − T*(N(Y),X) = B(X,Y) − B(Y,X)"},
      {"L3.1", "curvature", "double-fd", kDoubleFdTier,
       "R*(X,Y)Z = R(X,Y)Z + (∇_Y B)(ρX,Z) − (∇_X B)(ρY,Z) + (∇_Y A)(KX,Z) − (∇_X A)(KY,Z) + A(R(X,Y)η,Z) "
       "− B(T(X,Y),Z) + U(Y,U(X,Z)) − U(X,U(Y,Z))"},
      {"P3.1a", "curvature", "double-fd", kDoubleFdTier,
       "R*(X,Y)Z + P*(N(X),Y)Z − P*(N(Y),X)Z + Q*(N(X),N(Y))Z = R(X,Y)Z + (∇_{βY}B)(X,Z) − (∇_{βX}B)(Y,Z) "
       "+ A(R(X,Y)η,Z) + B(Y,B(X,Z)) − B(X,B(Y,Z))"},
      {"P3.1b", "curvature", "double-fd", kDoubleFdTier,
       "P*(X,Y)Z + Q*(X,N(Y))Z = P(X,Y)Z − (∇_{γX}B)(Y,Z) + (∇_{βY}A)(X,Z) + A(P(X,Y)η,Z) − B(T(X,Y),Z) "
       "+ B(Y,A(X,Z)) − A(X,B(Y,Z))"},
      {"P3.1c", "curvature", "double-fd", kDoubleFdTier,
       "Q*(X,Y)Z = Q(X,Y)Z + (∇_{γY}A)(X,Z) − (∇_{γX}A)(Y,Z) + A(Y,A(X,Z)) − A(X,A(Y,Z))"},
      {"P3.1a'", "curvature", "single-fd", kSingleFdTier,
       "R*(X,Y)η + P*(N(X),Y)η − P*(N(Y),X)η = R(X,Y)η + (∇_{βY}N)(X) − (∇_{βX}N)(Y) + B(Y,N(X)) − B(X,N(Y))"},
      {"P3.1b'", "curvature", "single-fd", kSingleFdTier,
       "P*(X,Y)η = P(X,Y)η − (∇_{γX}N)(Y) + B(Y,X) − N(T(X,Y)) − A(X,N(Y))"},
      {"P3.1c'", "curvature", "jet", kJetTier, "A(X,Y) = A(Y,X)"},
      {"P3.2", "curvature", "jet", kJetTier, "B = 0 ⇒ R*(X,Y)Z = R(X,Y)Z + A(R(X,Y)η,Z), and R* = 0 ⇔ R = 0"},
      {"P3.3-identity", "curvature", "single-fd", kSingleFdTier, "∇_{γX}N0 = 2N(X) + T*(N0,X) − A(X,N0)"},
      {"T3.1", "curvature", "single-fd", kSingleFdTier,
       "N0 = 0 ⇒ R*(X,Y)η = R(X,Y)η, and R*(X,Y)η = 0 ⇔ R(X,Y)η = 0"},
      {"E7", "connection", "jet", kJetTier, "D*X/dt = DX/dt + U(dc/dt,X)"},
      {"L4.1", "geodesic", "integration", 1e-6, "DX/dt = 0 ⇒ D*X/dt = U(dc/dt,X)"},
      {"T4.2", "geodesic", "integration", 1e-6,
       "D*V/dt = DV/dt + B(V,V); an L-geodesic is an L*-geodesic ⇔ B(V,V) = 0"},
      {"JACOBI-EQ", "geodesic", "double-fd", kDoubleFdTier, "D²J/dt² + R(V,J)V = 0 matches geodesic variation"},
      {"T4.3", "geodesic", "integration", 1e-5, "B(V,V) = 0 ⇒ same Jacobi fields"},
      {"T4.4-conjugate", "geodesic", "integration", 1e-3, "B(V,V) = 0 ⇒ same conjugate points"},
      {"T5.1", "special", "single-fd", kSingleFdTier,
       "B = 0 ⇒ ∇*_{β*X}T* = ∇_{βX}T + ∇_{βX}A; with L Berwald: L* Berwald ⇔ ∇_{βX}A = 0"},
      {"T5.2", "special", "single-fd", kSingleFdTier,
       "B = 0, L locally Minkowskian: L* locally Minkowskian ⇔ ∇_{βX}A = 0"},
      {"T5.3", "special", "jet", kJetTier, "B = 0 ⇒ P*(X,Y)η = P(X,Y)η; L Landsberg ⇔ L* Landsberg"},
      {"HOMOG", "connection", "jet", kJetTier, "F(x,λy) = λF, g(x,λy) = g, G(x,λy) = λ²G", true},
      {"EULER", "connection", "jet", kJetTier, "g(y,y) = F², N(y) = 2G, C(·,·,y) = 0", true},
      {"CARTAN-CONTRACT", "connection", "jet", kJetTier, "C_ijk totally symmetric, y^i C_ijk = 0, C^i_jk = g^il C_ljk",
       true},
      {"DEFLECT", "connection", "jet", kJetTier, "Γ^i_jk y^j = N^i_k, Γ^i_jk = Γ^i_kj", true},
      {"ORACLE-RPQ", "curvature", "single-fd", kSingleFdTier, "R, P, Q coefficients = commutator definition", true},
  };
  return list;
}

inline const CheckInfo& check_info(std::string_view id) {
  for (const auto& c : catalogue())
    if (c.id == id) return c;
  throw ConstructionError("unknown check id '" + std::string(id) + "'");
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"all", "connection", "curvature", "geodesic", "special"};
  return names;
}

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Running max; NaN counts as infinite.
struct Residual {
  double value = 0.0;
  void add(double r) {
    if (std::isnan(r)) r = kInf;
    value = std::max(value, std::abs(r));
  }
  template <class Derived>
  void add(const Eigen::MatrixBase<Derived>& expr) {
    const Eigen::MatrixXd m = expr;
    add(m.size() == 0 ? 0.0 : (m.allFinite() ? m.cwiseAbs().maxCoeff() : kInf));
  }
};

/// All basis tuples of the given dimensions, then three random tuples.
inline std::vector<std::vector<Eigen::VectorXd>> arguments(const std::vector<int>& dims, SampleRng& rng) {
  std::vector<std::vector<Eigen::VectorXd>> out{{}};
  for (int d : dims) {
    std::vector<std::vector<Eigen::VectorXd>> next;
    for (const auto& prefix : out)
      for (int k = 0; k < d; ++k) {
        auto t = prefix;
        t.push_back(Eigen::VectorXd::Unit(d, k));
        next.push_back(std::move(t));
      }
    out = std::move(next);
  }
  for (int r = 0; r < 3; ++r) {
    std::vector<Eigen::VectorXd> t;
    for (int d : dims) t.push_back(rng.unit_vector(d));
    out.push_back(std::move(t));
  }
  return out;
}

struct Context {
  const StructurePair& pair;
  const std::vector<SlitPoint>& points;
  std::uint64_t seed;
  const CheckInfo& info;
  int n() const { return pair.dim(); }
  SampleRng rng() const { return SampleRng(seed ^ fnv1a(info.id)); }
};

struct Outcome {
  double residual = 0.0;
  int samples = 0;
  bool skipped = false;
  std::string reason;
  std::vector<std::pair<std::string, double>> details;

  Outcome() = default;
  Outcome(double r, int n, bool skip = false, std::string why = {},
          std::vector<std::pair<std::string, double>> extra = {})
      : residual(r), samples(n), skipped(skip), reason(std::move(why)), details(std::move(extra)) {}
};

inline Outcome skip(std::string reason, std::vector<std::pair<std::string, double>> details = {}) {
  Outcome o;
  o.skipped = true;
  o.reason = std::move(reason);
  o.details = std::move(details);
  return o;
}

// --- per-point data ---------------------------------------------------------

struct PointData {
  ComparisonFrame c;
  CurvatureFrame cf, cfs;
};

inline PointData point_data(const StructurePair& pair, const SlitPoint& p) {
  if (!pair.domain().contains(p.x)) throw DomainError("point outside the common domain of " + pair.label());
  auto [f, cf] = full_frame(pair.L(), p);
  auto [s, cfs] = full_frame(pair.Lstar(), p);
  return {assemble_comparison(std::move(f), std::move(s)), std::move(cf), std::move(cfs)};
}

enum class Part { A, B, N, N0 };

inline TensorField comparison_field(const StructurePair& pair, Part part) {
  return [&pair, part](const SlitPoint& q) {
    const auto c = comparison_frame(pair, q);
    switch (part) {
      case Part::A: return c.A;
      case Part::B: return c.B;
      case Part::N: return Tensor::from(c.Ndiff);
      case Part::N0: return Tensor::from(c.N0);
    }
    return c.A;
  };
}

/// Horizontal and vertical covariant-derivative tables of one field.
struct Derivs {
  DirectionalTensor h, v;
  Tensor beta(const Eigen::VectorXd& x) const { return h.along(x); }
  Tensor gamma(const Eigen::VectorXd& x) const { return v.along(x); }
  /// ∇_W for W = (dx, dy): W = β(ρW) + γ(KW).
  Tensor along(const ConnectionFrame& f, const Eigen::VectorXd& w) const {
    const int n = f.n;
    return h.along(w.head(n)) + v.along(f.connection_map(w.head(n), w.tail(n)));
  }
};

inline Derivs derivs(const ConnectionFrame& f, const TensorField& field) {
  return {covariant_derivative_table(f, field, true), covariant_derivative_table(f, field, false)};
}

inline Eigen::VectorXd mat_apply(const Tensor& t, const Eigen::VectorXd& x) { return t.matrix() * x; }

/// 𝐑(X,Y)Z for X, Y tangent to the slit bundle: R(ρX,ρY) + P(KX,ρY) − P(KY,ρX) + Q(KX,KY).
inline Eigen::VectorXd curvature_form(const ConnectionFrame& f, const CurvatureFrame& cf, const Eigen::VectorXd& X,
                                      const Eigen::VectorXd& Y, const Eigen::VectorXd& Z) {
  const int n = f.n;
  const Eigen::VectorXd rx = X.head(n), ry = Y.head(n);
  const Eigen::VectorXd kx = f.connection_map(rx, X.tail(n)), ky = f.connection_map(ry, Y.tail(n));
  return apply(cf.R, rx, ry, Z) + apply(cf.P, kx, ry, Z) - apply(cf.P, ky, rx, Z) + apply(cf.Q, kx, ky, Z);
}

/// 𝐓(X,Y) = T(KX,ρY) − T(KY,ρX).
inline Eigen::VectorXd torsion_form(const ConnectionFrame& f, const Eigen::VectorXd& X, const Eigen::VectorXd& Y) {
  const int n = f.n;
  const Eigen::VectorXd rx = X.head(n), ry = Y.head(n);
  return f.torsion(f.connection_map(rx, X.tail(n)), ry) - f.torsion(f.connection_map(ry, Y.tail(n)), rx);
}

inline Eigen::VectorXd U(const ComparisonFrame& c, const Eigen::VectorXd& W, const Eigen::VectorXd& Z) {
  const int n = c.n();
  return c.u(W.head(n), W.tail(n), Z);
}

inline double max_abs_B(const Context& ctx) {
  double m = 0.0;
  for (const auto& p : ctx.points) m = std::max(m, comparison_frame(ctx.pair, p).B.max_abs());
  return m;
}

// --- connection checks ------------------------------------------------------

inline Outcome check_L2_1(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    for (const auto& a : arguments({ctx.n()}, rng)) r.add(c.a(a[0], c.frame.y()));
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_L2_2(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    r.add(Eigen::MatrixXd(c.frame_star.N - c.frame.N - c.Ndiff));
    for (const auto& a : arguments({2 * n}, rng)) {
      const Eigen::VectorXd dx = a[0].head(n), dy = a[0].tail(n);
      r.add(c.frame_star.connection_map(dx, dy) - c.frame.connection_map(dx, dy) - c.Ndiff * dx);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P2_1(const Context& ctx) {
  Residual r;
  int gated = 0, converse = 0;
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    double worst = 0.0;
    for (int a = 0; a < ctx.n(); ++a) {
      const auto [dx, dy] = c.frame.horizontal_lift(Eigen::VectorXd::Unit(ctx.n(), a));
      worst = std::max(worst, c.frame_star.connection_map(dx, dy).cwiseAbs().maxCoeff());
    }
    if (c.Ndiff.cwiseAbs().maxCoeff() <= kJetTier) {
      ++gated;
      r.add(worst);
    } else {
      ++converse;
      if (worst <= ctx.info.tolerance) r.add(kInf);  // N ≠ 0 but every lift stayed horizontal
    }
  }
  return {r.value, static_cast<int>(ctx.points.size()), false, {},
          {{"samples_with_N_zero", double(gated)}, {"samples_with_N_nonzero", double(converse)}}};
}

inline Outcome check_P2_2(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    for (const auto& a : arguments({n}, rng)) {
      const auto [sx, sy] = c.frame_star.horizontal_lift(a[0]);
      const auto [hx, hy] = c.frame.horizontal_lift(a[0]);
      r.add(sx - hx);
      r.add(sy - (hy - c.Ndiff * a[0]));
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P2_3a(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    for (const auto& a : arguments({ctx.n(), ctx.n()}, rng)) {
      const Eigen::VectorXd ts = torsion_oracle(ctx.pair.Lstar(), p, LiftKind::Vertical, a[0], LiftKind::Horizontal, a[1]);
      const Eigen::VectorXd t = torsion_oracle(ctx.pair.L(), p, LiftKind::Vertical, a[0], LiftKind::Horizontal, a[1]);
      r.add(ts - t - c.a(a[0], a[1]));
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P2_3b(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    for (const auto& a : arguments({ctx.n(), ctx.n()}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1];
      r.add(c.frame_star.torsion(c.Ndiff * X, Y) - c.frame_star.torsion(c.Ndiff * Y, X) - c.b(X, Y) + c.b(Y, X));
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_E7(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    const Eigen::VectorXd xdot = c.frame.y();  // canonical lift
    for (const auto& a : arguments({n, n, n}, rng)) {
      const Eigen::VectorXd &ydot = a[0], &X = a[1], &Xdot = a[2];
      const Eigen::VectorXd ds = Xdot + c.frame_star.connection_matrix(xdot, ydot) * X;
      const Eigen::VectorXd d = Xdot + c.frame.connection_matrix(xdot, ydot) * X;
      r.add(ds - d - c.u(xdot, ydot, X));
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

// sanity checks run on both structures

template <class Fn>
Outcome both_structures(const Context& ctx, Fn&& per_point) {
  Residual r;
  for (const FinslerStructure* L : {&ctx.pair.L(), &ctx.pair.Lstar()})
    for (const auto& p : ctx.points) r.add(per_point(*L, p));
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_HOMOG(const Context& ctx) {
  return both_structures(ctx, [](const FinslerStructure& L, const SlitPoint& p) {
    const auto f = connection_frame(L, p);
    Residual r;
    for (double lam : {0.5, 2.0, 3.7}) {
      SlitPoint q = p;
      for (auto& v : q.y) v *= lam;
      const auto fq = connection_frame(L, q);
      r.add((fq.F - lam * f.F) / (lam * f.F));
      r.add(Eigen::MatrixXd((fq.g - f.g) / f.g.cwiseAbs().maxCoeff()));
      r.add(Eigen::VectorXd((fq.G - lam * lam * f.G) / (lam * lam * (1.0 + f.G.cwiseAbs().maxCoeff()))));
    }
    return r.value;
  });
}

inline Outcome check_EULER(const Context& ctx) {
  return both_structures(ctx, [](const FinslerStructure& L, const SlitPoint& p) {
    const auto f = connection_frame(L, p);
    const Eigen::VectorXd y = f.y();
    Residual r;
    r.add((y.dot(f.g * y) - f.F * f.F) / (f.F * f.F));
    r.add(Eigen::VectorXd((f.N * y - 2.0 * f.G) / (1.0 + f.G.cwiseAbs().maxCoeff())));
    for (int a = 0; a < f.n; ++a) r.add(apply(f.C, Eigen::VectorXd::Unit(f.n, a), y));
    return r.value;
  });
}

inline Outcome check_CARTAN(const Context& ctx) {
  return both_structures(ctx, [](const FinslerStructure& L, const SlitPoint& p) {
    const auto f = connection_frame(L, p);
    const int n = f.n;
    const Eigen::VectorXd y = f.y();
    Residual r;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double c = f.C_lower(i, j, k);
          r.add(c - f.C_lower(j, i, k));
          r.add(c - f.C_lower(k, j, i));
          r.add(c - f.C_lower(i, k, j));
          double raised = 0.0, contracted = 0.0;
          for (int l = 0; l < n; ++l) {
            raised += f.g_inv(i, l) * f.C_lower(l, j, k);
            contracted += y(l) * f.C_lower(l, j, k);
          }
          r.add(raised - f.C(i, j, k));
          if (i == 0) r.add(contracted);
        }
    return r.value;
  });
}

inline Outcome check_DEFLECT(const Context& ctx) {
  return both_structures(ctx, [](const FinslerStructure& L, const SlitPoint& p) {
    const auto f = connection_frame(L, p);
    const int n = f.n;
    const Eigen::VectorXd y = f.y();
    Residual r;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          s += f.Gamma(i, j, k) * y(j);
          r.add(f.Gamma(i, j, k) - f.Gamma(i, k, j));
        }
        r.add(s - f.N(i, k));
      }
    return r.value;
  });
}

// --- curvature checks -------------------------------------------------------

inline Outcome check_L3_1(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fA = comparison_field(ctx.pair, Part::A), fB = comparison_field(ctx.pair, Part::B);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dA = derivs(c.frame, fA), dB = derivs(c.frame, fB);
    const Eigen::VectorXd eta = c.frame.y();
    for (const auto& a : arguments({2 * n, 2 * n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1], &Z = a[2];
      const Eigen::VectorXd rx = X.head(n), ry = Y.head(n);
      const Eigen::VectorXd kx = c.frame.connection_map(rx, X.tail(n)), ky = c.frame.connection_map(ry, Y.tail(n));
      const Eigen::VectorXd omega = apply(dB.along(c.frame, Y), rx, Z) - apply(dB.along(c.frame, X), ry, Z) +
                                    apply(dA.along(c.frame, Y), kx, Z) - apply(dA.along(c.frame, X), ky, Z) +
                                    c.a(curvature_form(c.frame, d.cf, X, Y, eta), Z) -
                                    c.b(torsion_form(c.frame, X, Y), Z) + U(c, Y, U(c, X, Z)) - U(c, X, U(c, Y, Z));
      r.add(curvature_form(c.frame_star, d.cfs, X, Y, Z) - curvature_form(c.frame, d.cf, X, Y, Z) - omega);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1a(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fB = comparison_field(ctx.pair, Part::B);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dB = derivs(c.frame, fB);
    const Eigen::VectorXd eta = c.frame.y();
    for (const auto& a : arguments({n, n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1], &Z = a[2];
      const Eigen::VectorXd NX = c.Ndiff * X, NY = c.Ndiff * Y;
      const Eigen::VectorXd lhs = apply(d.cfs.R, X, Y, Z) + apply(d.cfs.P, NX, Y, Z) - apply(d.cfs.P, NY, X, Z) +
                                  apply(d.cfs.Q, NX, NY, Z);
      const Eigen::VectorXd rhs = apply(d.cf.R, X, Y, Z) + apply(dB.beta(Y), X, Z) - apply(dB.beta(X), Y, Z) +
                                  c.a(apply(d.cf.R, X, Y, eta), Z) + c.b(Y, c.b(X, Z)) - c.b(X, c.b(Y, Z));
      r.add(lhs - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1b(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fA = comparison_field(ctx.pair, Part::A), fB = comparison_field(ctx.pair, Part::B);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dA = derivs(c.frame, fA), dB = derivs(c.frame, fB);
    const Eigen::VectorXd eta = c.frame.y();
    for (const auto& a : arguments({n, n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1], &Z = a[2];
      const Eigen::VectorXd lhs = apply(d.cfs.P, X, Y, Z) + apply(d.cfs.Q, X, Eigen::VectorXd(c.Ndiff * Y), Z);
      const Eigen::VectorXd rhs = apply(d.cf.P, X, Y, Z) - apply(dB.gamma(X), Y, Z) + apply(dA.beta(Y), X, Z) +
                                  c.a(apply(d.cf.P, X, Y, eta), Z) - c.b(c.frame.torsion(X, Y), Z) +
                                  c.b(Y, c.a(X, Z)) - c.a(X, c.b(Y, Z));
      r.add(lhs - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1c(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fA = comparison_field(ctx.pair, Part::A);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dA = derivs(c.frame, fA);
    for (const auto& a : arguments({n, n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1], &Z = a[2];
      const Eigen::VectorXd rhs = apply(d.cf.Q, X, Y, Z) + apply(dA.gamma(Y), X, Z) - apply(dA.gamma(X), Y, Z) +
                                  c.a(Y, c.a(X, Z)) - c.a(X, c.a(Y, Z));
      r.add(apply(d.cfs.Q, X, Y, Z) - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1a_prime(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fN = comparison_field(ctx.pair, Part::N);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dN = derivs(c.frame, fN);
    const Eigen::VectorXd eta = c.frame.y();
    for (const auto& a : arguments({n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1];
      const Eigen::VectorXd NX = c.Ndiff * X, NY = c.Ndiff * Y;
      const Eigen::VectorXd lhs = apply(d.cfs.R, X, Y, eta) + apply(d.cfs.P, NX, Y, eta) - apply(d.cfs.P, NY, X, eta);
      const Eigen::VectorXd rhs = apply(d.cf.R, X, Y, eta) + mat_apply(dN.beta(Y), X) - mat_apply(dN.beta(X), Y) +
                                  c.b(Y, NX) - c.b(X, NY);
      r.add(lhs - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1b_prime(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fN = comparison_field(ctx.pair, Part::N);
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Derivs dN = derivs(c.frame, fN);
    const Eigen::VectorXd eta = c.frame.y();
    for (const auto& a : arguments({n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1];
      const Eigen::VectorXd rhs = apply(d.cf.P, X, Y, eta) - mat_apply(dN.gamma(X), Y) + c.b(Y, X) -
                                  c.Ndiff * c.frame.torsion(X, Y) - c.a(X, Eigen::VectorXd(c.Ndiff * Y));
      r.add(apply(d.cfs.P, X, Y, eta) - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_1c_prime(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    for (const auto& a : arguments({ctx.n(), ctx.n()}, rng)) r.add(c.a(a[0], a[1]) - c.a(a[1], a[0]));
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_P3_2(const Context& ctx) {
  const double hyp = max_abs_B(ctx);
  if (hyp > kJetTier) return skip("hypothesis not satisfied: max|B| above 1e-8", {{"hypothesis_max_B", hyp}});
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  double rmax = 0.0, rsmax = 0.0;
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const Eigen::VectorXd eta = d.c.frame.y();
    rmax = std::max(rmax, d.cf.R.max_abs());
    rsmax = std::max(rsmax, d.cfs.R.max_abs());
    for (const auto& a : arguments({n, n, n}, rng)) {
      const Eigen::VectorXd &X = a[0], &Y = a[1], &Z = a[2];
      r.add(apply(d.cfs.R, X, Y, Z) - apply(d.cf.R, X, Y, Z) - d.c.a(apply(d.cf.R, X, Y, eta), Z));
    }
  }
  const bool holds = (rmax <= kClassifyThreshold) == (rsmax <= kClassifyThreshold);
  if (!holds) r.add(kInf);
  return {r.value, static_cast<int>(ctx.points.size()), false, {},
          {{"hypothesis_max_B", hyp}, {"max_R", rmax}, {"max_R_star", rsmax}, {"equivalence_holds", holds ? 1.0 : 0.0}}};
}

inline Outcome check_P3_3(const Context& ctx) {
  Residual r;
  auto rng = ctx.rng();
  const auto fN0 = comparison_field(ctx.pair, Part::N0);
  for (const auto& p : ctx.points) {
    const auto c = comparison_frame(ctx.pair, p);
    const DirectionalTensor dv = covariant_derivative_table(c.frame, fN0, false);
    for (const auto& a : arguments({ctx.n()}, rng)) {
      const Eigen::VectorXd& X = a[0];
      const Eigen::VectorXd lhs = dv.along(X).vector();
      const Eigen::VectorXd rhs = 2.0 * c.Ndiff * X + c.frame_star.torsion(c.N0, X) - c.a(X, c.N0);
      r.add(lhs - rhs);
    }
  }
  return {r.value, static_cast<int>(ctx.points.size())};
}

inline Outcome check_T3_1(const Context& ctx) {
  double hyp = 0.0;
  for (const auto& p : ctx.points) hyp = std::max(hyp, comparison_frame(ctx.pair, p).N0.cwiseAbs().maxCoeff());
  if (hyp > kJetTier) return skip("hypothesis not satisfied: max|N0| above 1e-8", {{"hypothesis_max_N0", hyp}});
  Residual r;
  auto rng = ctx.rng();
  const int n = ctx.n();
  double ind = 0.0, ind_star = 0.0;
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const Eigen::VectorXd eta = d.c.frame.y();
    ind = std::max(ind, integrability_indicator(d.cf, eta));
    ind_star = std::max(ind_star, integrability_indicator(d.cfs, eta));
    for (const auto& a : arguments({n, n}, rng))
      r.add(apply(d.cfs.R, a[0], a[1], eta) - apply(d.cf.R, a[0], a[1], eta));
  }
  const bool holds = (ind <= kClassifyThreshold) == (ind_star <= kClassifyThreshold);
  if (!holds) r.add(kInf);
  return {r.value, static_cast<int>(ctx.points.size()), false, {},
          {{"hypothesis_max_N0", hyp}, {"integrability_L", ind}, {"integrability_L_star", ind_star},
           {"equivalence_holds", holds ? 1.0 : 0.0}}};
}

inline Outcome check_ORACLE(const Context& ctx) {
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto args = arguments({n, n}, rng);
  return both_structures(ctx, [&](const FinslerStructure& L, const SlitPoint& p) {
    const auto cf = curvature_frame(L, p);
    Residual r;
    for (const auto& a : args) {
      const Eigen::VectorXd &X = a[0], &Y = a[1];
      const std::pair<CurvatureKind, const Tensor*> kinds[] = {
          {CurvatureKind::R, &cf.R}, {CurvatureKind::P, &cf.P}, {CurvatureKind::Q, &cf.Q}};
      for (const auto& [kind, t] : kinds) {
        const LiftKind xk = kind == CurvatureKind::R ? LiftKind::Horizontal : LiftKind::Vertical;
        const LiftKind yk = kind == CurvatureKind::Q ? LiftKind::Vertical : LiftKind::Horizontal;
        const Eigen::MatrixXd m = curvature_oracle_matrix(L, p, xk, X, yk, Y);
        for (int z = 0; z < n; ++z) {
          const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, z);
          r.add(Eigen::VectorXd(m * e - apply(*t, X, Y, e)));
        }
      }
    }
    return r.value;
  });
}

// --- geodesic checks --------------------------------------------------------

struct GeodesicSeed {
  Eigen::VectorXd x0, y0;
  double t_end = 0.0;
  int steps = 0;
};

inline constexpr std::size_t kGeodesicSamples = 3;

/// Unit-speed (F = 1) starts at the first shared samples.
inline std::vector<GeodesicSeed> geodesic_seeds(const Context& ctx, const FinslerStructure& L) {
  std::vector<GeodesicSeed> out;
  const Domain& dom = ctx.pair.domain();
  const double t_end = dom.kind == Domain::Kind::Ball ? 0.25 * dom.radius : 2.0;
  const int steps = std::max(20, static_cast<int>(std::lround(kStepsPerUnitTime * t_end)));
  for (std::size_t k = 0; k < std::min(kGeodesicSamples, ctx.points.size()); ++k) {
    const SlitPoint& p = ctx.points[k];
    const double f = L.value(p);
    const int n = L.dim();
    GeodesicSeed s{Eigen::Map<const Eigen::VectorXd>(p.x.data(), n), Eigen::Map<const Eigen::VectorXd>(p.y.data(), n) / f,
                   t_end, steps};
    out.push_back(std::move(s));
  }
  return out;
}

inline constexpr std::size_t kMinTrajectory = 11;

/// Target for the finite-difference floor of a trajectory, a decade under the tightest integration tier.
inline constexpr double kResolutionTarget = 1e-7;
inline constexpr int kMaxGeodesicSteps = 25600;

/// max |x'' + 2G(x, x')| with x'' from the sampled velocities: the resolution of grid derivatives.
inline double fd_floor(const FinslerStructure& L, const Trajectory& tr) {
  if (tr.size() < 5) return kInf;
  std::vector<Eigen::VectorXd> vel;
  for (std::size_t k = 0; k < tr.size(); ++k) vel.push_back(tr.y(k));
  Residual r;
  for (std::size_t k = 0; k < tr.size(); ++k)
    r.add(Eigen::VectorXd(grid_derivative(vel, k, tr.dt) + 2.0 * spray(L, tr.point(k))));
  return r.value;
}

inline Trajectory geodesic(const FinslerStructure& L, const GeodesicSeed& s) {
  return integrate_geodesic(L, s.x0, s.y0, s.t_end, s.steps);
}

/// Geodesic from a seed, doubling the step count until grid derivatives resolve it.
inline Trajectory resolved_geodesic(const FinslerStructure& L, const GeodesicSeed& s) {
  for (int steps = s.steps;; steps *= 2) {
    Trajectory tr = integrate_geodesic(L, s.x0, s.y0, s.t_end, steps);
    if (tr.size() < kMinTrajectory || 2 * steps > kMaxGeodesicSteps || fd_floor(L, tr) <= kResolutionTarget)
      return tr;
  }
}

/// Geodesic from a seed on the time grid of `ref`.
inline Trajectory geodesic_on_grid(const FinslerStructure& L, const GeodesicSeed& s, const Trajectory& ref) {
  return integrate_geodesic(L, s.x0, s.y0, s.t_end, static_cast<int>(std::lround(s.t_end / ref.dt)));
}

inline Outcome check_L4_1(const Context& ctx) {
  Residual r;
  int used = 0;
  double floor = 0.0;
  auto rng = ctx.rng();
  for (const auto& s : geodesic_seeds(ctx, ctx.pair.L())) {
    const Trajectory base = resolved_geodesic(ctx.pair.L(), s);
    if (base.size() < kMinTrajectory) continue;
    ++used;
    floor = std::max(floor, fd_floor(ctx.pair.L(), base));
    const Eigen::VectorXd X0 = rng.unit_vector(ctx.n());
    const Trajectory tr = parallel_transport(ctx.pair.L(), base, X0);
    std::vector<Eigen::VectorXd> X, V;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      X.push_back(tr.aux_vector(k, 0));
      V.push_back(tr.y(k));
    }
    if (tr.size() < 5) continue;
    for (std::size_t k = 0; k < tr.size(); k += std::max<std::size_t>(1, tr.size() / 20)) {
      const SlitPoint p = tr.point(k);
      const Eigen::VectorXd Xdot = grid_derivative(X, k, tr.dt), ydot = grid_derivative(V, k, tr.dt);
      const Eigen::VectorXd ds = covariant_derivative_along(ctx.pair.Lstar(), p, V[k], ydot, X[k], Xdot);
      const auto c = comparison_frame(ctx.pair, p);
      r.add(ds - c.u(V[k], ydot, X[k]));
    }
  }
  if (used == 0) return skip("no geodesic stayed in the domain long enough");
  return {r.value, used, false, {}, {{"max_fd_floor", floor}}};
}

inline Outcome check_T4_2(const Context& ctx) {
  Residual rel;
  int used = 0;
  double bvv = 0.0, cross = 0.0, own = 0.0, floor = 0.0;
  bool holds = true;
  const StructurePair swapped(ctx.pair.Lstar(), ctx.pair.L());
  for (const StructurePair* pr : {&ctx.pair, &swapped}) {
    for (const auto& s : geodesic_seeds(ctx, pr->L())) {
      const Trajectory base = resolved_geodesic(pr->L(), s);
      if (base.size() < kMinTrajectory) continue;
      ++used;
      floor = std::max(floor, fd_floor(pr->L(), base));
      const auto res = projective_residual(*pr, base);
      rel.add(res.relation);
      bvv = std::max(bvv, res.b_vv);
      cross = std::max(cross, res.cross_equation);
      own = std::max(own, res.own_equation);
      if (res.b_vv <= 1e-7 && res.cross_equation > 1e-5) holds = false;
      if (res.b_vv >= 1e-3 && res.cross_equation < 1e-4) holds = false;
    }
  }
  if (used == 0) return skip("no geodesic stayed in the domain long enough");
  if (!holds) rel.add(kInf);
  return {rel.value, used, false, {},
          {{"max_B_VV", bvv}, {"cross_equation", cross}, {"own_equation", own}, {"max_fd_floor", floor}, {"branches_hold", holds ? 1.0 : 0.0}}};
}

inline Outcome check_JACOBI(const Context& ctx) {
  Residual r;
  int used = 0;
  auto rng = ctx.rng();
  constexpr double h = 1e-4;
  for (const FinslerStructure* L : {&ctx.pair.L(), &ctx.pair.Lstar()}) {
    for (const auto& s : geodesic_seeds(ctx, *L)) {
      const Trajectory base = geodesic(*L, s);
      if (base.size() < kMinTrajectory) continue;
      const Eigen::VectorXd J0 = 0.5 * rng.unit_vector(ctx.n()), W0 = rng.unit_vector(ctx.n());
      const Trajectory jac = integrate_jacobi(*L, base, J0, W0);
      // geodesic variation with J(0) = J0 and dJ/dt(0) = W0 − Γ(J0, V)
      const auto f0 = connection_frame(*L, base.point(0));
      const Eigen::VectorXd dJ0 = W0 - apply(f0.Gamma, J0, s.y0);
      const int steps = static_cast<int>(std::lround(s.t_end / base.dt));
      const Trajectory plus = integrate_geodesic(*L, s.x0 + h * J0, s.y0 + h * dJ0, s.t_end, steps);
      const Trajectory minus = integrate_geodesic(*L, s.x0 - h * J0, s.y0 - h * dJ0, s.t_end, steps);
      const std::size_t m = std::min({jac.size(), plus.size(), minus.size()});
      if (m < kMinTrajectory) continue;
      ++used;
      for (std::size_t k = 0; k < m; ++k) r.add(Eigen::VectorXd(jac.aux_vector(k, 0) - (plus.x(k) - minus.x(k)) / (2 * h)));
    }
  }
  if (used == 0) return skip("no geodesic stayed in the domain long enough");
  return {r.value, used};
}

/// Largest |B(V,V)| along the L-geodesics used by the Jacobi and conjugate-point checks.
inline double geodesic_hypothesis(const Context& ctx, int& used) {
  double bvv = 0.0;
  used = 0;
  for (const auto& s : geodesic_seeds(ctx, ctx.pair.L())) {
    const Trajectory base = geodesic(ctx.pair.L(), s);
    if (base.size() < kMinTrajectory) continue;
    ++used;
    for (std::size_t k = 0; k < base.size(); ++k) {
      const auto c = comparison_frame(ctx.pair, base.point(k));
      bvv = std::max(bvv, c.b(base.y(k), base.y(k)).cwiseAbs().maxCoeff());
    }
  }
  return bvv;
}

inline Outcome check_T4_3(const Context& ctx) {
  int used = 0;
  const double hyp = geodesic_hypothesis(ctx, used);
  if (used == 0) return skip("no geodesic stayed in the domain long enough");
  if (hyp > kJetTier) return skip("hypothesis not satisfied: max|B(V,V)| above 1e-8", {{"hypothesis_max_B_VV", hyp}});
  Residual r;
  auto rng = ctx.rng();
  for (const auto& s : geodesic_seeds(ctx, ctx.pair.L())) {
    const Trajectory a = geodesic(ctx.pair.L(), s), b = geodesic_on_grid(ctx.pair.Lstar(), s, a);
    if (a.size() < kMinTrajectory) continue;
    const Eigen::VectorXd J0 = rng.unit_vector(ctx.n()), W0 = rng.unit_vector(ctx.n());
    // same J(0) and dJ/dt(0): the covariant initial derivatives differ by Γ* − Γ
    const SlitPoint p0 = a.point(0);
    const Eigen::VectorXd W0s = W0 + apply(connection_frame(ctx.pair.Lstar(), p0).Gamma, J0, s.y0) -
                                apply(connection_frame(ctx.pair.L(), p0).Gamma, J0, s.y0);
    const Trajectory ja = integrate_jacobi(ctx.pair.L(), a, J0, W0), jb = integrate_jacobi(ctx.pair.Lstar(), b, J0, W0s);
    if (ja.size() != jb.size()) r.add(kInf);
    for (std::size_t k = 0; k < std::min(ja.size(), jb.size()); ++k)
      r.add(Eigen::VectorXd(ja.aux_vector(k, 0) - jb.aux_vector(k, 0)));
  }
  return {r.value, used, false, {}, {{"hypothesis_max_B_VV", hyp}, {"geodesics", double(used)}}};
}

inline Outcome check_T4_4(const Context& ctx) {
  int used = 0;
  const double hyp = geodesic_hypothesis(ctx, used);
  if (used == 0) return skip("no geodesic stayed in the domain long enough");
  if (hyp > kJetTier) return skip("hypothesis not satisfied: max|B(V,V)| above 1e-8", {{"hypothesis_max_B_VV", hyp}});
  Residual r;
  double count = 0;
  for (const auto& s : geodesic_seeds(ctx, ctx.pair.L())) {
    const Trajectory a = geodesic(ctx.pair.L(), s), b = geodesic_on_grid(ctx.pair.Lstar(), s, a);
    if (a.size() < kMinTrajectory || b.size() < kMinTrajectory) continue;
    const auto ca = conjugate_points(ctx.pair.L(), a, a.t_end());
    const auto cb = conjugate_points(ctx.pair.Lstar(), b, b.t_end());
    count += static_cast<double>(ca.size());
    if (ca.size() != cb.size()) {
      r.add(kInf);
      continue;
    }
    for (std::size_t k = 0; k < ca.size(); ++k) {
      r.add(ca[k].t - cb[k].t);
      if (ca[k].multiplicity != cb[k].multiplicity) r.add(kInf);
    }
  }
  return {r.value, used, false, {}, {{"hypothesis_max_B_VV", hyp}, {"conjugate_points_L", count}}};
}

// --- special manifolds ------------------------------------------------------

struct SpecialData {
  double max_B = 0.0;
  double identity = 0.0;  // ∇*_{β*X}T* − ∇_{βX}T − ∇_{βX}A
  double nabla_A = 0.0, berwald = 0.0, berwald_star = 0.0, max_R = 0.0, max_R_star = 0.0;
  double landsberg = 0.0, landsberg_star = 0.0, landsberg_identity = 0.0;
};

inline SpecialData special_data(const Context& ctx, bool with_derivatives) {
  SpecialData s;
  s.max_B = max_abs_B(ctx);
  if (s.max_B > kJetTier) return s;
  auto rng = ctx.rng();
  const int n = ctx.n();
  const auto fA = comparison_field(ctx.pair, Part::A);
  const auto fT = torsion_field(ctx.pair.L()), fTs = torsion_field(ctx.pair.Lstar());
  Residual id, lid;
  for (const auto& p : ctx.points) {
    const auto d = point_data(ctx.pair, p);
    const auto& c = d.c;
    const Eigen::VectorXd eta = c.frame.y();
    s.max_R = std::max(s.max_R, d.cf.R.max_abs());
    s.max_R_star = std::max(s.max_R_star, d.cfs.R.max_abs());
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Eigen::VectorXd ea = Eigen::VectorXd::Unit(n, a), eb = Eigen::VectorXd::Unit(n, b);
        const Eigen::VectorXd pl = apply(d.cf.P, ea, eb, eta), ps = apply(d.cfs.P, ea, eb, eta);
        s.landsberg = std::max(s.landsberg, pl.cwiseAbs().maxCoeff());
        s.landsberg_star = std::max(s.landsberg_star, ps.cwiseAbs().maxCoeff());
      }
    for (const auto& a : arguments({n, n}, rng))
      lid.add(Eigen::VectorXd(apply(d.cfs.P, a[0], a[1], eta) - apply(d.cf.P, a[0], a[1], eta)));
    if (!with_derivatives) continue;
    const DirectionalTensor dA = covariant_derivative_table(c.frame, fA, true);
    const DirectionalTensor dT = covariant_derivative_table(c.frame, fT, true);
    const DirectionalTensor dTs = covariant_derivative_table(c.frame_star, fTs, true);
    s.nabla_A = std::max(s.nabla_A, dA.max_abs());
    s.berwald = std::max(s.berwald, dT.max_abs());
    s.berwald_star = std::max(s.berwald_star, dTs.max_abs());
    for (const auto& a : arguments({n}, rng)) {
      const Tensor diff = dTs.along(a[0]) - dT.along(a[0]) - dA.along(a[0]);
      id.add(diff.max_abs());
    }
  }
  s.identity = id.value;
  s.landsberg_identity = lid.value;
  return s;
}

inline std::vector<std::pair<std::string, double>> special_details(const SpecialData& s) {
  return {{"hypothesis_max_B", s.max_B},  {"max_nabla_A", s.nabla_A}, {"berwald_L", s.berwald},
          {"berwald_L_star", s.berwald_star}, {"max_R", s.max_R},     {"max_R_star", s.max_R_star}};
}

inline Outcome check_T5_1(const Context& ctx) {
  const SpecialData s = special_data(ctx, true);
  if (s.max_B > kJetTier) return skip("hypothesis not satisfied: max|B| above 1e-8", {{"hypothesis_max_B", s.max_B}});
  const double t = kClassifyThreshold;
  const bool bl = s.berwald <= t, bs = s.berwald_star <= t, a0 = s.nabla_A <= t;
  bool holds = true;
  if (bl && bs != a0) holds = false;
  if (bs && bl != a0) holds = false;
  Outcome o{s.identity, static_cast<int>(ctx.points.size()), false, {}, special_details(s)};
  o.details.push_back({"implication_holds", holds ? 1.0 : 0.0});
  if (!holds) o.residual = kInf;
  return o;
}

inline Outcome check_T5_2(const Context& ctx) {
  const SpecialData s = special_data(ctx, true);
  if (s.max_B > kJetTier) return skip("hypothesis not satisfied: max|B| above 1e-8", {{"hypothesis_max_B", s.max_B}});
  const double t = kClassifyThreshold;
  const bool ml = s.berwald <= t && s.max_R <= t, ms = s.berwald_star <= t && s.max_R_star <= t;
  const bool a0 = s.nabla_A <= t;
  bool holds = true;
  if (ml && ms != a0) holds = false;
  if (ms && ml != a0) holds = false;
  Outcome o{s.identity, static_cast<int>(ctx.points.size()), false, {}, special_details(s)};
  o.details.push_back({"implication_holds", holds ? 1.0 : 0.0});
  if (!holds) o.residual = kInf;
  return o;
}

inline Outcome check_T5_3(const Context& ctx) {
  const SpecialData s = special_data(ctx, false);
  if (s.max_B > kJetTier) return skip("hypothesis not satisfied: max|B| above 1e-8", {{"hypothesis_max_B", s.max_B}});
  const bool holds = (s.landsberg <= kClassifyThreshold) == (s.landsberg_star <= kClassifyThreshold);
  Outcome o{s.landsberg_identity, static_cast<int>(ctx.points.size()), false, {},
            {{"hypothesis_max_B", s.max_B},
             {"landsberg_L", s.landsberg},
             {"landsberg_L_star", s.landsberg_star},
             {"implication_holds", holds ? 1.0 : 0.0}}};
  if (!holds) o.residual = kInf;
  return o;
}

using CheckFn = Outcome (*)(const Context&);

inline CheckFn check_function(std::string_view id) {
  static const std::vector<std::pair<std::string_view, CheckFn>> table = {
      {"L2.1", check_L2_1},       {"L2.2", check_L2_2},
      {"P2.1", check_P2_1},       {"P2.2", check_P2_2},
      {"P2.3a", check_P2_3a},     {"P2.3b", check_P2_3b},
      {"L3.1", check_L3_1},       {"P3.1a", check_P3_1a},
      {"P3.1b", check_P3_1b},     {"P3.1c", check_P3_1c},
      {"P3.1a'", check_P3_1a_prime}, {"P3.1b'", check_P3_1b_prime},
      {"P3.1c'", check_P3_1c_prime}, {"P3.2", check_P3_2},
      {"P3.3-identity", check_P3_3}, {"T3.1", check_T3_1},
      {"E7", check_E7},           {"L4.1", check_L4_1},
      {"T4.2", check_T4_2},       {"JACOBI-EQ", check_JACOBI},
      {"T4.3", check_T4_3},       {"T4.4-conjugate", check_T4_4},
      {"T5.1", check_T5_1},       {"T5.2", check_T5_2},
      {"T5.3", check_T5_3},       {"HOMOG", check_HOMOG},
      {"EULER", check_EULER},     {"CARTAN-CONTRACT", check_CARTAN},
      {"DEFLECT", check_DEFLECT}, {"ORACLE-RPQ", check_ORACLE},
  };
  for (const auto& [k, fn] : table)
    if (k == id) return fn;
  throw ConstructionError("unknown check id '" + std::string(id) + "'");
}

inline CheckResult evaluate(const CheckInfo& info, const StructurePair& pair, const std::vector<SlitPoint>& points,
                            std::uint64_t seed, const std::map<std::string, double>& overrides) {
  CheckResult res;
  res.id = std::string(info.id);
  res.statement = std::string(info.statement);
  res.suite = std::string(info.suite);
  res.tier = std::string(info.tier);
  res.tolerance = info.tolerance;
  if (auto it = overrides.find(res.id); it != overrides.end()) res.tolerance = it->second;
  res.samples = static_cast<int>(points.size());
  CheckInfo local = info;
  local.tolerance = res.tolerance;
  const Context ctx{pair, points, seed, local};
  try {
    Outcome o = check_function(info.id)(ctx);
    res.details = std::move(o.details);
    res.samples = o.samples;
    if (o.skipped) {
      res.verdict = Verdict::Skipped;
      res.reason = std::move(o.reason);
      res.samples = 0;
      return res;
    }
    res.max_residual = o.residual;
    res.verdict = o.residual <= res.tolerance ? Verdict::Pass : Verdict::Fail;
    res.reason = std::move(o.reason);
  } catch (const Error& e) {
    res.verdict = Verdict::Fail;
    res.max_residual = kInf;
    res.reason = std::string("error: ") + e.what();
  }
  return res;
}

}  // namespace detail

/// Shared sample draw of a suite run.
inline std::vector<SlitPoint> suite_points(const StructurePair& pair, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConstructionError("samples must be at least 1");
  return sample_points(pair.domain(), pair.dim(), samples, seed);
}

inline CheckResult run_check(std::string_view id, const StructurePair& pair, int samples, std::uint64_t seed,
                             const std::map<std::string, double>& overrides = {}) {
  const CheckInfo& info = check_info(id);
  return detail::evaluate(info, pair, suite_points(pair, samples, seed), seed, overrides);
}

inline std::vector<const CheckInfo*> suite_checks(const std::string& suite) {
  if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
    throw ConstructionError("unknown suite '" + suite + "'");
  std::vector<const CheckInfo*> out;
  for (const auto& c : catalogue())
    if (suite == "all" || c.suite == suite) out.push_back(&c);
  return out;
}

/// Runs the checks of a suite on `workers` threads; results come back in catalogue order.
inline std::vector<CheckResult> run_suite(const StructurePair& pair, const std::string& suite, int samples,
                                          std::uint64_t seed, const std::map<std::string, double>& overrides = {},
                                          int workers = 1) {
  for (const auto& [id, v] : overrides) {
    check_info(id);
    if (!(v >= 0.0)) throw ConstructionError("tolerance for " + id + " must be non-negative");
  }
  const auto checks = suite_checks(suite);
  const auto points = suite_points(pair, samples, seed);
  std::vector<CheckResult> results(checks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < checks.size(); k = next++)
      results[k] = detail::evaluate(*checks[k], pair, points, seed, overrides);
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(checks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return results;
}

struct SuiteSummary {
  int passed = 0, failed = 0, skipped = 0;
};

inline SuiteSummary summarize(const std::vector<CheckResult>& results) {
  SuiteSummary s;
  for (const auto& r : results) {
    if (r.verdict == Verdict::Pass) ++s.passed;
    else if (r.verdict == Verdict::Fail) ++s.failed;
    else ++s.skipped;
  }
  return s;
}

}  // namespace finsler

#pragma once

// Geodesics, parallel transport and Jacobi fields by fixed-step RK4.
//
// Curves are lifted canonically: the y-slot of the slit point is the velocity.
// Along a geodesic D/dt X = dX/dt + Γ(X, V). The state vector is
// [x, v, aux_1, ..., aux_m], each block of length n.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finsler/cartan.hpp"
#include "finsler/comparison.hpp"
#include "finsler/error.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// Default resolution: RK4 steps per unit of parameter time.
inline constexpr int kStepsPerUnitTime = 200;

struct Trajectory {
  std::string label;
  std::string integrator = "rk4";
  std::string step_policy;
  int n = 0;
  int aux = 0;  // number of auxiliary n-vectors per state
  double dt = 0.0;
  bool halted = false;  // stopped early at the domain boundary
  std::string halt_reason;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;

  std::size_t size() const noexcept { return times.size(); }
  Eigen::VectorXd x(std::size_t k) const { return states[k].segment(0, n); }
  Eigen::VectorXd y(std::size_t k) const { return states[k].segment(n, n); }
  Eigen::VectorXd aux_vector(std::size_t k, int a) const { return states[k].segment((2 + a) * n, n); }
  SlitPoint point(std::size_t k) const {
    const Eigen::VectorXd xs = x(k), ys = y(k);
    return {std::vector<double>(xs.data(), xs.data() + n), std::vector<double>(ys.data(), ys.data() + n)};
  }
  double t_end() const { return times.empty() ? 0.0 : times.back(); }
};

namespace detail {

using Rhs = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline SlitPoint state_point(const Eigen::VectorXd& s, int n) {
  return {std::vector<double>(s.data(), s.data() + n), std::vector<double>(s.data() + n, s.data() + 2 * n)};
}

/// State point for a right-hand side; RK stages may overshoot the domain.
inline SlitPoint stage_point(const FinslerStructure& L, const Eigen::VectorXd& s) {
  if (!s.allFinite()) throw DomainError("non-finite state in " + L.label());
  SlitPoint p = state_point(s, L.dim());
  L.require_in_domain(p);
  return p;
}

inline Eigen::VectorXd rk4_stages(const Rhs& f, const Eigen::VectorXd& s, const Eigen::VectorXd& k1, double h) {
  const Eigen::VectorXd k2 = f(s + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(s + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(s + h * k3);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Eigen::VectorXd rk4_step(const Rhs& f, const Eigen::VectorXd& s, double h) { return rk4_stages(f, s, f(s), h); }

/// Integrates until `steps` are done or the state leaves the domain.
inline Trajectory rk4_run(const FinslerStructure& L, const Rhs& f, const Eigen::VectorXd& s0, int aux, double t_end,
                          int steps) {
  if (steps < 2) throw ConstructionError("integration needs at least 2 steps");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConstructionError("integration time must be positive");
  const int n = L.dim();
  L.require_in_domain(state_point(s0, n));
  Trajectory tr;
  tr.label = L.label();
  tr.n = n;
  tr.aux = aux;
  tr.dt = t_end / steps;
  std::ostringstream policy;
  policy << "fixed step " << tr.dt;
  tr.step_policy = policy.str();
  tr.times.push_back(0.0);
  tr.states.push_back(s0);
  for (int k = 1; k <= steps; ++k) {
    // failures at the accepted state propagate; failures at trial stages mean the step overshot
    const Eigen::VectorXd k1 = f(tr.states.back());
    Eigen::VectorXd next;
    try {
      next = rk4_stages(f, tr.states.back(), k1, tr.dt);
    } catch (const DomainError& e) {
      tr.halted = true;
      tr.halt_reason = e.what();
      break;
    } catch (const ConvexityError& e) {
      tr.halted = true;
      tr.halt_reason = e.what();
      break;
    } catch (const EvaluationError& e) {
      tr.halted = true;
      tr.halt_reason = e.what();
      break;
    }
    const SlitPoint q = state_point(next, n);
    if (!next.allFinite() || !L.domain().contains(q.x)) {
      tr.halted = true;
      tr.halt_reason = "step left the domain of " + L.label();
      break;
    }
    tr.times.push_back(k == steps ? t_end : k * tr.dt);
    tr.states.push_back(std::move(next));
  }
  return tr;
}

inline Eigen::VectorXd geodesic_rhs(const FinslerStructure& L, const Eigen::VectorXd& s) {
  const int n = L.dim();
  Eigen::VectorXd out(s.size());
  out.head(n) = s.segment(n, n);
  out.segment(n, n) = -2.0 * spray(L, stage_point(L, s));
  return out;
}

inline Eigen::VectorXd transport_rhs(const FinslerStructure& L, const Eigen::VectorXd& s, int aux) {
  const int n = L.dim();
  const auto f = connection_frame(L, stage_point(L, s));
  const Eigen::VectorXd v = s.segment(n, n);
  Eigen::VectorXd out(s.size());
  out.head(n) = v;
  out.segment(n, n) = -2.0 * f.G;
  for (int a = 0; a < aux; ++a) out.segment((2 + a) * n, n) = -apply(f.Gamma, Eigen::VectorXd(s.segment((2 + a) * n, n)), v);
  return out;
}

/// Blocks come in pairs (J, W = DJ/dt).
inline Eigen::VectorXd jacobi_rhs(const FinslerStructure& L, const Eigen::VectorXd& s, int fields) {
  const int n = L.dim();
  const auto [f, c] = full_frame(L, stage_point(L, s));
  const Eigen::VectorXd v = s.segment(n, n);
  Eigen::VectorXd out(s.size());
  out.head(n) = v;
  out.segment(n, n) = -2.0 * f.G;
  for (int a = 0; a < fields; ++a) {
    const Eigen::VectorXd J = s.segment((2 + 2 * a) * n, n), W = s.segment((3 + 2 * a) * n, n);
    out.segment((2 + 2 * a) * n, n) = W - apply(f.Gamma, J, v);
    out.segment((3 + 2 * a) * n, n) = -apply(c.R, v, J, v) - apply(f.Gamma, W, v);
  }
  return out;
}

inline Eigen::VectorXd stacked(const std::vector<Eigen::VectorXd>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

inline void check_vector(const Eigen::VectorXd& v, int n, const char* what) {
  if (v.size() != n) throw ConstructionError(std::string(what) + " has wrong dimension");
}

}  // namespace detail

/// Solves x'' + 2 G(x, x') = 0 from (x0, y0) over [0, t_end] with `steps` RK4 steps.
inline Trajectory integrate_geodesic(const FinslerStructure& L, const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                     double t_end, int steps) {
  detail::check_vector(x0, L.dim(), "x0");
  detail::check_vector(y0, L.dim(), "y0");
  return detail::rk4_run(
      L, [&L](const Eigen::VectorXd& s) { return detail::geodesic_rhs(L, s); }, detail::stacked({x0, y0}), 0, t_end,
      steps);
}

/// Parallel transport of X0 along a geodesic; the geodesic is re-integrated jointly on the same grid.
inline Trajectory parallel_transport(const FinslerStructure& L, const Trajectory& base, const Eigen::VectorXd& X0) {
  detail::check_vector(X0, L.dim(), "X0");
  if (base.size() < 3) throw ConstructionError("base trajectory too short");
  const int steps = static_cast<int>(base.size()) - 1;
  return detail::rk4_run(
      L, [&L](const Eigen::VectorXd& s) { return detail::transport_rhs(L, s, 1); },
      detail::stacked({base.x(0), base.y(0), X0}), 1, base.t_end(), steps);
}

/// Jacobi fields with J(0) = J0[a], DJ/dt(0) = W0[a]; aux blocks are (J_a, DJ_a/dt) pairs.
inline Trajectory integrate_jacobi_fields(const FinslerStructure& L, const Trajectory& base,
                                          const std::vector<Eigen::VectorXd>& J0,
                                          const std::vector<Eigen::VectorXd>& W0) {
  if (J0.size() != W0.size() || J0.empty()) throw ConstructionError("Jacobi initial data mismatch");
  if (base.size() < 3) throw ConstructionError("base trajectory too short");
  std::vector<Eigen::VectorXd> blocks{base.x(0), base.y(0)};
  for (std::size_t a = 0; a < J0.size(); ++a) {
    detail::check_vector(J0[a], L.dim(), "J0");
    detail::check_vector(W0[a], L.dim(), "J0dot");
    blocks.push_back(J0[a]);
    blocks.push_back(W0[a]);
  }
  const int fields = static_cast<int>(J0.size());
  const int steps = static_cast<int>(base.size()) - 1;
  return detail::rk4_run(
      L, [&L, fields](const Eigen::VectorXd& s) { return detail::jacobi_rhs(L, s, fields); }, detail::stacked(blocks),
      2 * fields, base.t_end(), steps);
}

/// Solves D²J/dt² + R(V,J)V = 0 along a geodesic with J(0) = J0, DJ/dt(0) = J0dot.
inline Trajectory integrate_jacobi(const FinslerStructure& L, const Trajectory& base, const Eigen::VectorXd& J0,
                                   const Eigen::VectorXd& J0dot) {
  return integrate_jacobi_fields(L, base, {J0}, {J0dot});
}

/// D X/dt along an arbitrary curve (x(t), y(t)) at one instant: Ẋ + M(ẋ, ẏ) X.
inline Eigen::VectorXd covariant_derivative_along(const FinslerStructure& L, const SlitPoint& p,
                                                  const Eigen::VectorXd& xdot, const Eigen::VectorXd& ydot,
                                                  const Eigen::VectorXd& X, const Eigen::VectorXd& Xdot) {
  return Xdot + connection_frame(L, p).connection_matrix(xdot, ydot) * X;
}

/// Five-point central derivative of a per-sample quantity on a uniform grid (one-sided at the ends).
inline Eigen::VectorXd grid_derivative(const std::vector<Eigen::VectorXd>& v, std::size_t k, double dt) {
  const std::size_t m = v.size();
  if (m < 5) throw ConstructionError("grid derivative needs at least 5 samples");
  if (k >= 2 && k + 2 < m) return (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * dt);
  if (k < 2) {
    const std::size_t s = k;  // forward 5-point stencil anchored at sample 0
    const double w[5][5] = {{-25, 48, -36, 16, -3}, {-3, -10, 18, -6, 1}};
    Eigen::VectorXd d = Eigen::VectorXd::Zero(v[0].size());
    for (int j = 0; j < 5; ++j) d += w[s][j] * v[static_cast<std::size_t>(j)];
    return d / (12.0 * dt);
  }
  const std::size_t s = m - 1 - k;
  const double w[2][5] = {{25, -48, 36, -16, 3}, {3, 10, -18, 6, -1}};
  Eigen::VectorXd d = Eigen::VectorXd::Zero(v[0].size());
  for (int j = 0; j < 5; ++j) d += w[s][j] * v[m - 1 - static_cast<std::size_t>(j)];
  return d / (12.0 * dt);
}

/// Largest relative deviation of F(x, x') from its initial value.
inline double energy_drift(const FinslerStructure& L, const Trajectory& tr) {
  const double f0 = L.value(tr.point(0));
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, std::abs(L.value(tr.point(k)) - f0) / f0);
  return worst;
}

// ---------------------------------------------------------------------------
// Conjugate points.

struct ConjugatePoint {
  double t = 0.0;
  int multiplicity = 0;
};

struct ConjugateOptions {
  double time_tolerance = 1e-6;
  double rank_threshold = 1e-5;  // relative to the largest singular value along the geodesic
};

namespace detail {

/// g_V-orthonormal basis of the complement of V at the start of the geodesic.
inline std::vector<Eigen::VectorXd> transverse_basis(const FinslerStructure& L, const Trajectory& base) {
  const int n = L.dim();
  const Eigen::MatrixXd g = connection_frame(L, base.point(0)).g;
  std::vector<Eigen::VectorXd> basis{base.y(0) / std::sqrt(base.y(0).dot(g * base.y(0)))};
  for (int k = 0; k < n && static_cast<int>(basis.size()) < n; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k);
    for (const auto& b : basis) e -= b.dot(g * e) * b;
    const double len = std::sqrt(e.dot(g * e));
    if (len > 1e-8) basis.push_back(e / len);
  }
  basis.erase(basis.begin());
  return basis;
}

inline Eigen::MatrixXd jacobi_matrix(const Eigen::VectorXd& s, int n, int fields) {
  Eigen::MatrixXd m(n, fields);
  for (int a = 0; a < fields; ++a) m.col(a) = s.segment((2 + 2 * a) * n, n);
  return m;
}

inline double jacobi_det(const Eigen::VectorXd& s, int n, int fields) {
  Eigen::MatrixXd m(n, n);
  m.leftCols(fields) = jacobi_matrix(s, n, fields);
  m.col(fields) = s.segment(n, n);
  return m.determinant();
}

}  // namespace detail

/// Zeros of the transverse Jacobi fields vanishing at t = 0, on (0, t_max].
///
/// Simple zeros are found by a sign change of det[J_1 .. J_{n-1} V] and bisection;
/// zeros of even multiplicity by golden-section minimisation of the smallest
/// singular value. Multiplicity is the number of singular values below threshold.
inline std::vector<ConjugatePoint> conjugate_points(const FinslerStructure& L, const Trajectory& base, double t_max,
                                                    const ConjugateOptions& opt = {}) {
  const int n = L.dim();
  const int fields = n - 1;
  std::vector<Eigen::VectorXd> J0(static_cast<std::size_t>(fields), Eigen::VectorXd::Zero(n));
  const auto W0 = detail::transverse_basis(L, base);
  const Trajectory tr = integrate_jacobi_fields(L, base, J0, W0);
  const detail::Rhs rhs = [&L, fields](const Eigen::VectorXd& s) { return detail::jacobi_rhs(L, s, fields); };

  std::size_t last = 0;
  while (last + 1 < tr.size() && tr.times[last + 1] <= t_max + 1e-12) ++last;
  auto state_at = [&](double t) {
    std::size_t k = std::min(static_cast<std::size_t>(t / tr.dt), last);
    if (k > 0 && tr.times[k] > t) --k;
    return detail::rk4_step(rhs, tr.states[k], t - tr.times[k]);
  };
  std::vector<double> sigma_min(last + 1), det(last + 1);
  double scale = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::jacobi_matrix(tr.states[k], n, fields));
    sigma_min[k] = svd.singularValues().minCoeff();
    scale = std::max(scale, svd.singularValues().maxCoeff());
    det[k] = detail::jacobi_det(tr.states[k], n, fields);
  }
  const double threshold = opt.rank_threshold * scale;
  auto multiplicity = [&](const Eigen::VectorXd& s) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::jacobi_matrix(s, n, fields));
    int m = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) m += svd.singularValues()(i) < threshold;
    return m;
  };

  std::vector<ConjugatePoint> out;
  for (std::size_t k = 1; k < last; ++k) {
    if (det[k] == 0.0 || (det[k] > 0) == (det[k + 1] > 0)) continue;
    double a = tr.times[k], b = tr.times[k + 1];
    double da = det[k];
    while (b - a > opt.time_tolerance) {
      const double m = 0.5 * (a + b);
      const double dm = detail::jacobi_det(state_at(m), n, fields);
      if ((dm > 0) == (da > 0)) {
        a = m;
        da = dm;
      } else {
        b = m;
      }
    }
    const double t = 0.5 * (a + b);
    out.push_back({t, std::max(1, multiplicity(state_at(t)))});
  }
  // even-multiplicity zeros: interior minima of sigma_min with no nearby sign change
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (std::size_t k = 2; k + 1 <= last; ++k) {
    if (!(sigma_min[k] <= sigma_min[k - 1] && sigma_min[k] <= sigma_min[k + 1])) continue;
    bool near_root = false;
    for (const auto& c : out) near_root |= std::abs(c.t - tr.times[k]) < 2.5 * tr.dt;
    if (near_root) continue;
    double a = tr.times[k - 1], b = tr.times[k + 1];
    auto smin = [&](double t) {
      return Eigen::JacobiSVD<Eigen::MatrixXd>(detail::jacobi_matrix(state_at(t), n, fields)).singularValues().minCoeff();
    };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = smin(c), fd = smin(d);
    while (b - a > opt.time_tolerance) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = smin(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = smin(d);
      }
    }
    const double t = 0.5 * (a + b);
    const Eigen::VectorXd s = state_at(t);
    const int m = multiplicity(s);
    if (m > 0) out.push_back({t, m});
  }
  std::sort(out.begin(), out.end(), [](const ConjugatePoint& p, const ConjugatePoint& q) { return p.t < q.t; });
  return out;
}

// ---------------------------------------------------------------------------
// Geodesics of one structure tested against the other.

struct ProjectiveResidual {
  double b_vv = 0.0;           // max |B(V,V)|
  double cross_equation = 0.0;  // max |D*V/dt| = |x'' + 2 G*(x, x')|
  double own_equation = 0.0;    // max |DV/dt| = |x'' + 2 G(x, x')|
  double relation = 0.0;        // max |D*V/dt - DV/dt - B(V,V)|
};

/// Residuals along an L-geodesic; x'' comes from a five-point difference of the sampled velocity.
inline ProjectiveResidual projective_residual(const StructurePair& pair, const Trajectory& base) {
  ProjectiveResidual r;
  std::vector<Eigen::VectorXd> vel;
  for (std::size_t k = 0; k < base.size(); ++k) vel.push_back(base.y(k));
  for (std::size_t k = 0; k < base.size(); ++k) {
    const SlitPoint p = base.point(k);
    const Eigen::VectorXd acc = grid_derivative(vel, k, base.dt);
    const auto c = comparison_frame(pair, p);
    const Eigen::VectorXd v = base.y(k);
    const Eigen::VectorXd bvv = c.b(v, v);
    const Eigen::VectorXd own = acc + 2.0 * c.frame.G;
    const Eigen::VectorXd cross = acc + 2.0 * c.frame_star.G;
    r.b_vv = std::max(r.b_vv, bvv.cwiseAbs().maxCoeff());
    r.cross_equation = std::max(r.cross_equation, cross.cwiseAbs().maxCoeff());
    r.own_equation = std::max(r.own_equation, own.cwiseAbs().maxCoeff());
    r.relation = std::max(r.relation, (cross - own - bvv).cwiseAbs().maxCoeff());
  }
  return r;
}

// ---------------------------------------------------------------------------
// CSV export: t, x1..xn, y1..yn, then auxiliary blocks.

inline void write_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& aux_names = {}) {
  const int n = tr.n;
  os << "t";
  for (const char* block : {"x", "y"})
    for (int i = 1; i <= n; ++i) os << ',' << block << i;
  for (int a = 0; a < tr.aux; ++a) {
    const std::string name = a < static_cast<int>(aux_names.size()) ? aux_names[static_cast<std::size_t>(a)]
                                                                       : "aux" + std::to_string(a + 1) + "_";
    for (int i = 1; i <= n; ++i) os << ',' << name << i;
  }
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << tr.times[k];
    for (Eigen::Index i = 0; i < tr.states[k].size(); ++i) os << ',' << tr.states[k](i);
    os << '\n';
  }
}

}  // namespace finsler

#pragma once

// Cartan connection of one Finsler structure in chart coordinates.
//
// Index conventions (output slot first everywhere):
//   Gamma(i, j, k) = Γ^i_jk with ∇_{δ_k} ∂_j = Γ^i_jk ∂_i,  δ_k = ∂_k - N^m_k ∂/∂y^m
//   C(i, j, k)     = C^i_jk with ∇_{∂/∂y^k} ∂_j = C^i_jk ∂_i
//   N(i, j)        = N^i_j = ∂G^i/∂y^j  (the connection map: K(dx, dy) = dy + N dx)
//   R(i, a, b, c)  = i-th component of R(e_a, e_b) e_c, likewise P and Q.
//
// Curvature follows 𝐑(X,Y) = [∇_Y, ∇_X] + ∇_[X,Y], the negative of the
// common textbook sign. With it the Jacobi equation reads D²J + R(V,J)V = 0.
//
// The mixed torsion T(X̄,Ȳ) = 𝐓(γX̄, βȲ) is the Cartan tensor C; the
// horizontal torsion S vanishes identically and is not stored.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finsler/autodiff.hpp"
#include "finsler/error.hpp"
#include "finsler/jet.hpp"
#include "finsler/sampling.hpp"
#include "finsler/structure.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

struct ConnectionFrame {
  SlitPoint p;
  int n = 0;
  double F = 0.0;
  Eigen::MatrixXd g, g_inv;
  Eigen::VectorXd G;
  Eigen::MatrixXd N;
  Tensor Gamma;
  Tensor C;
  Tensor C_lower;

  /// K(X) for X = (dx, dy) in coordinate components.
  Eigen::VectorXd connection_map(const Eigen::VectorXd& dx, const Eigen::VectorXd& dy) const { return dy + N * dx; }

  /// Coordinates (dx, dy) of the horizontal lift βX̄.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> horizontal_lift(const Eigen::VectorXd& x) const { return {x, -N * x}; }

  /// Matrix M with ∇_W Z̄ = W(Z) + M Z for W = (dx, dy).
  Eigen::MatrixXd connection_matrix(const Eigen::VectorXd& dx, const Eigen::VectorXd& dy) const {
    const Eigen::VectorXd k = connection_map(dx, dy);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int a = 0; a < n; ++a) m(i, j) += Gamma(i, j, a) * dx(a) + C(i, j, a) * k(a);
    return m;
  }

  /// Mixed torsion T(X̄, Ȳ) = C(Ȳ, X̄); symmetric.
  Eigen::VectorXd torsion(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return apply(C, y, x); }

  Eigen::VectorXd y() const { return Eigen::Map<const Eigen::VectorXd>(p.y.data(), n); }
};

struct CurvatureFrame {
  Tensor R, P, Q;
};

namespace detail {

/// Connection data as jets; each entry is exact up to its valid order.
struct JetFrame {
  int n = 0;
  std::vector<Jet> g, g_inv, G, N, Gamma, C, C_lower;

  const Jet& gam(int i, int j, int k) const { return Gamma[static_cast<std::size_t>((i * n + j) * n + k)]; }
  const Jet& cm(int i, int j, int k) const { return C[static_cast<std::size_t>((i * n + j) * n + k)]; }
  const Jet& nl(int i, int j) const { return N[static_cast<std::size_t>(i * n + j)]; }
};

inline std::vector<Jet> invert(const std::vector<Jet>& m, int n) {
  std::vector<Jet> a = m;
  std::vector<Jet> inv(static_cast<std::size_t>(n * n), Jet(0.0));
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i * n + i)] = Jet(1.0);
  auto at = [n](std::vector<Jet>& v, int i, int j) -> Jet& { return v[static_cast<std::size_t>(i * n + j)]; };
  // positive definite input: no pivoting needed
  for (int c = 0; c < n; ++c) {
    const Jet pivot_inv = Jet(1.0) / at(a, c, c);
    for (int j = 0; j < n; ++j) {
      at(a, c, j) = at(a, c, j) * pivot_inv;
      at(inv, c, j) = at(inv, c, j) * pivot_inv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const Jet f = at(a, r, c);
      for (int j = 0; j < n; ++j) {
        at(a, r, j) = at(a, r, j) - f * at(a, c, j);
        at(inv, r, j) = at(inv, r, j) - f * at(inv, c, j);
      }
    }
  }
  return inv;
}

inline void require_convex(const Eigen::MatrixXd& g, const FinslerStructure& L) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(1.0, hi)) || !std::isfinite(hi))
    throw ConvexityError("fundamental tensor of " + L.label() + " is not positive definite");
}

/// Connection jets at p; order >= 3 gives values, order 4 adds first derivatives.
inline JetFrame jet_frame(const FinslerStructure& L, const SlitPoint& p, int order) {
  const int n = L.dim();
  const Jet E = L.energy_jet(p, order);
  const auto& layout = *E.layout();
  auto yv = [&](int i) { return n + i; };
  auto idx2 = [n](int i, int j) { return static_cast<std::size_t>(i * n + j); };
  auto idx3 = [n](int i, int j, int k) { return static_cast<std::size_t>((i * n + j) * n + k); };

  JetFrame f;
  f.n = n;
  std::vector<Jet> Ey(static_cast<std::size_t>(n)), Ex(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Ey[static_cast<std::size_t>(i)] = E.derivative(yv(i));
    Ex[static_cast<std::size_t>(i)] = E.derivative(i);
  }
  f.g.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      f.g[idx2(i, j)] = 0.5 * Ey[static_cast<std::size_t>(i)].derivative(yv(j));
      f.g[idx2(j, i)] = f.g[idx2(i, j)];
    }
  Eigen::MatrixXd gv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gv(i, j) = f.g[idx2(i, j)].value();
  require_convex(gv, L);
  f.g_inv = invert(f.g, n);

  // spray: G^i = 1/4 g^{il} (y^k ∂²F²/∂y^l∂x^k - ∂F²/∂x^l)
  std::vector<Jet> w(static_cast<std::size_t>(n));
  for (int l = 0; l < n; ++l) {
    Jet s = -Ex[static_cast<std::size_t>(l)];
    for (int k = 0; k < n; ++k)
      s = s + Jet::variable(layout, yv(k), p.y[static_cast<std::size_t>(k)]) * Ey[static_cast<std::size_t>(l)].derivative(k);
    w[static_cast<std::size_t>(l)] = s;
  }
  f.G.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Jet s(0.0);
    for (int l = 0; l < n; ++l) s = s + f.g_inv[idx2(i, l)] * w[static_cast<std::size_t>(l)];
    f.G[static_cast<std::size_t>(i)] = 0.25 * s;
  }
  f.N.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f.N[idx2(i, j)] = f.G[static_cast<std::size_t>(i)].derivative(yv(j));

  // Cartan tensor
  std::vector<std::vector<Jet>> gy(static_cast<std::size_t>(n * n)), gx(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto& dy = gy[idx2(i, j)];
      auto& dx = gx[idx2(i, j)];
      for (int k = 0; k < n; ++k) {
        dy.push_back(f.g[idx2(i, j)].derivative(yv(k)));
        dx.push_back(f.g[idx2(i, j)].derivative(k));
      }
    }
  f.C_lower.resize(static_cast<std::size_t>(n * n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) f.C_lower[idx3(i, j, k)] = 0.5 * gy[idx2(i, j)][static_cast<std::size_t>(k)];
  f.C.assign(static_cast<std::size_t>(n * n * n), Jet(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet s(0.0);
        for (int l = 0; l < n; ++l) s = s + f.g_inv[idx2(i, l)] * f.C_lower[idx3(l, j, k)];
        f.C[idx3(i, j, k)] = s;
      }

  // δ_k g_ij
  std::vector<Jet> dg(static_cast<std::size_t>(n * n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet s = gx[idx2(i, j)][static_cast<std::size_t>(k)];
        for (int m = 0; m < n; ++m) s = s - f.N[idx2(m, k)] * gy[idx2(i, j)][static_cast<std::size_t>(m)];
        dg[idx3(i, j, k)] = s;
      }
  f.Gamma.assign(static_cast<std::size_t>(n * n * n), Jet(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        Jet s(0.0);
        for (int m = 0; m < n; ++m)
          s = s + f.g_inv[idx2(i, m)] * (dg[idx3(m, j, k)] + dg[idx3(m, k, j)] - dg[idx3(j, k, m)]);
        f.Gamma[idx3(i, j, k)] = 0.5 * s;
        f.Gamma[idx3(i, k, j)] = f.Gamma[idx3(i, j, k)];
      }
  return f;
}

inline ConnectionFrame values(const JetFrame& jf, const FinslerStructure& L, const SlitPoint& p) {
  const int n = jf.n;
  ConnectionFrame f;
  f.p = p;
  f.n = n;
  f.F = L(p.x, p.y);
  f.g.resize(n, n);
  f.g_inv.resize(n, n);
  f.N.resize(n, n);
  f.G.resize(n);
  f.Gamma = Tensor(n, 3, 1);
  f.C = Tensor(n, 3, 1);
  f.C_lower = Tensor(n, 3, 0);
  for (int i = 0; i < n; ++i) {
    f.G(i) = jf.G[static_cast<std::size_t>(i)].value();
    for (int j = 0; j < n; ++j) {
      f.g(i, j) = jf.g[static_cast<std::size_t>(i * n + j)].value();
      f.g_inv(i, j) = jf.g_inv[static_cast<std::size_t>(i * n + j)].value();
      f.N(i, j) = jf.nl(i, j).value();
      for (int k = 0; k < n; ++k) {
        f.Gamma(i, j, k) = jf.gam(i, j, k).value();
        f.C(i, j, k) = jf.cm(i, j, k).value();
        f.C_lower(i, j, k) = jf.C_lower[static_cast<std::size_t>((i * n + j) * n + k)].value();
      }
    }
  }
  return f;
}

}  // namespace detail

/// Full Cartan-connection data of L at p.
inline ConnectionFrame connection_frame(const FinslerStructure& L, const SlitPoint& p) {
  return detail::values(detail::jet_frame(L, p, 3), L, p);
}

/// Spray coefficients G^i(x, y) only (order-2 jets); used by the integrators.
inline Eigen::VectorXd spray(const FinslerStructure& L, const SlitPoint& p) {
  const int n = L.dim();
  const Jet E = L.energy_jet(p, 2);
  Eigen::MatrixXd g(n, n);
  Eigen::VectorXd w(n);
  for (int l = 0; l < n; ++l) {
    double s = -E.partial({l});
    for (int k = 0; k < n; ++k) {
      s += p.y[static_cast<std::size_t>(k)] * E.partial({n + l, k});
      g(l, k) = 0.5 * E.partial({n + l, n + k});
    }
    w(l) = s;
  }
  detail::require_convex(g, L);
  return 0.25 * g.ldlt().solve(w);
}

namespace detail {

inline CurvatureFrame curvature_from(const JetFrame& jf) {
  const int n = jf.n;
  auto dX = [](const Jet& q, int k) { return q.derivative(k).value(); };
  auto dY = [n](const Jet& q, int k) { return q.derivative(n + k).value(); };
  Eigen::MatrixXd Nv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Nv(i, j) = jf.nl(i, j).value();
  auto dH = [&](const Jet& q, int k) {
    double s = dX(q, k);
    for (int m = 0; m < n; ++m) s -= Nv(m, k) * dY(q, m);
    return s;
  };
  auto gam = [&](int i, int j, int k) { return jf.gam(i, j, k).value(); };
  auto cm = [&](int i, int j, int k) { return jf.cm(i, j, k).value(); };

  // Ω^m_kl with [δ_k, δ_l] = Ω^m_kl ∂/∂y^m
  Tensor omega(n, 3, 1);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) omega(m, k, l) = dH(jf.nl(m, k), l) - dH(jf.nl(m, l), k);

  CurvatureFrame cf{Tensor(n, 4, 1), Tensor(n, 4, 1), Tensor(n, 4, 1)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          // textbook-sign components of (∇_a∇_b - ∇_b∇_a - ∇_[a,b]) ∂_j for the three lift pairs
          double r = dH(jf.gam(i, j, l), k) - dH(jf.gam(i, j, k), l);
          double pm = dY(jf.gam(i, j, l), k) - dH(jf.cm(i, j, k), l);
          double q = dY(jf.cm(i, j, l), k) - dY(jf.cm(i, j, k), l);
          for (int m = 0; m < n; ++m) {
            r += gam(m, j, l) * gam(i, m, k) - gam(m, j, k) * gam(i, m, l) - cm(i, j, m) * omega(m, k, l);
            pm += gam(m, j, l) * cm(i, m, k) - cm(m, j, k) * gam(i, m, l) + dY(jf.nl(m, l), k) * cm(i, j, m);
            q += cm(m, j, l) * cm(i, m, k) - cm(m, j, k) * cm(i, m, l);
          }
          cf.R(i, k, l, j) = -r;
          cf.P(i, k, l, j) = -pm;
          cf.Q(i, k, l, j) = -q;
        }
  return cf;
}

}  // namespace detail

/// Curvature tensors R, P, Q of L at p from the order-4 coefficient jets.
inline CurvatureFrame curvature_frame(const FinslerStructure& L, const SlitPoint& p) {
  return detail::curvature_from(detail::jet_frame(L, p, 4));
}

/// Connection and curvature from a single order-4 jet pass.
inline std::pair<ConnectionFrame, CurvatureFrame> full_frame(const FinslerStructure& L, const SlitPoint& p) {
  const auto jf = detail::jet_frame(L, p, 4);
  return {detail::values(jf, L, p), detail::curvature_from(jf)};
}

// ---------------------------------------------------------------------------
// Finite-difference machinery on the slit bundle.

/// Step for outer finite differences: 1e-5 * (1 + |coordinate|), one Richardson level.
inline constexpr double kOuterStep = 1e-5;

namespace detail {

inline SlitPoint displaced(const SlitPoint& p, const Eigen::VectorXd& dx, const Eigen::VectorXd& dy, double h) {
  SlitPoint q = p;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    q.x[i] += h * dx(static_cast<Eigen::Index>(i));
    q.y[i] += h * dy(static_cast<Eigen::Index>(i));
  }
  return q;
}

/// Directional derivative of a flat-vector-valued function along W = (dx, dy).
template <class Fn>
std::vector<double> directional_fd(Fn&& f, const SlitPoint& p, const Eigen::VectorXd& dx, const Eigen::VectorXd& dy,
                                   double base = kOuterStep) {
  double scale = 0.0, dir = 0.0;
  for (double v : p.x) scale = std::max(scale, std::abs(v));
  for (double v : p.y) scale = std::max(scale, std::abs(v));
  dir = std::max(dx.cwiseAbs().maxCoeff(), dy.cwiseAbs().maxCoeff());
  if (dir == 0.0) {
    std::vector<double> zero = f(p);
    std::fill(zero.begin(), zero.end(), 0.0);
    return zero;
  }
  const double h = base * (1.0 + scale) / dir;
  auto central = [&](double step) {
    std::vector<double> plus = f(displaced(p, dx, dy, step));
    const std::vector<double> minus = f(displaced(p, dx, dy, -step));
    for (std::size_t k = 0; k < plus.size(); ++k) plus[k] = (plus[k] - minus[k]) / (2.0 * step);
    return plus;
  };
  std::vector<double> coarse = central(h);
  const std::vector<double> fine = central(0.5 * h);
  for (std::size_t k = 0; k < coarse.size(); ++k) coarse[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
  return coarse;
}

inline std::vector<double> flat(const Eigen::MatrixXd& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}
inline Eigen::MatrixXd unflat(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace detail

/// A pi-tensor field given by its coefficients as a function of (x, y).
using TensorField = std::function<Tensor(const SlitPoint&)>;

/// ∇_W field at the frame's point for W = (dx, dy): W(coefficients) plus connection terms.
inline Tensor covariant_derivative(const ConnectionFrame& frame, const TensorField& field, const Eigen::VectorXd& dx,
                                   const Eigen::VectorXd& dy) {
  Tensor at_p = field(frame.p);
  const auto deriv = detail::directional_fd([&](const SlitPoint& q) { return field(q).data(); }, frame.p, dx, dy);
  const Eigen::MatrixXd m = frame.connection_matrix(dx, dy);
  const int n = frame.n, rank = at_p.rank();
  Tensor out = at_p;
  out.data() = deriv;
  // index loop over all components of a rank-r tensor
  std::vector<int> idx(static_cast<std::size_t>(rank), 0);
  std::vector<std::size_t> stride(static_cast<std::size_t>(rank), 1);
  for (int s = rank - 2; s >= 0; --s) stride[static_cast<std::size_t>(s)] = stride[static_cast<std::size_t>(s) + 1] * static_cast<std::size_t>(n);
  for (std::size_t off = 0; off < at_p.size(); ++off) {
    std::size_t rem = off;
    for (int s = 0; s < rank; ++s) {
      idx[static_cast<std::size_t>(s)] = static_cast<int>(rem / stride[static_cast<std::size_t>(s)]);
      rem %= stride[static_cast<std::size_t>(s)];
    }
    double corr = 0.0;
    for (int s = 0; s < rank; ++s) {
      const int a = idx[static_cast<std::size_t>(s)];
      const std::size_t base = off - static_cast<std::size_t>(a) * stride[static_cast<std::size_t>(s)];
      for (int mm = 0; mm < n; ++mm) {
        const double v = at_p.data()[base + static_cast<std::size_t>(mm) * stride[static_cast<std::size_t>(s)]];
        if (s < at_p.upper()) corr += m(a, mm) * v;
        else corr -= m(mm, a) * v;
      }
    }
    out.data()[off] += corr;
  }
  return out;
}

/// ∇_{βX̄} field at p (horizontal lift of the Cartan connection of L).
inline Tensor covariant_deriv_h(const FinslerStructure& L, const TensorField& field, const SlitPoint& p,
                                const Eigen::VectorXd& x) {
  const auto frame = connection_frame(L, p);
  const auto [dx, dy] = frame.horizontal_lift(x);
  return covariant_derivative(frame, field, dx, dy);
}

/// ∇_{γX̄} field at p (vertical lift).
inline Tensor covariant_deriv_v(const FinslerStructure& L, const TensorField& field, const SlitPoint& p,
                                const Eigen::VectorXd& x) {
  const auto frame = connection_frame(L, p);
  return covariant_derivative(frame, field, Eigen::VectorXd::Zero(L.dim()), x);
}

/// Per-basis-direction covariant derivatives {∇_{lift e_k} field}, k = 0..n-1.
inline DirectionalTensor covariant_derivative_table(const ConnectionFrame& frame, const TensorField& field,
                                                    bool horizontal) {
  std::vector<Tensor> parts;
  for (int k = 0; k < frame.n; ++k) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(frame.n, k);
    if (horizontal) {
      const auto [dx, dy] = frame.horizontal_lift(e);
      parts.push_back(covariant_derivative(frame, field, dx, dy));
    } else {
      parts.push_back(covariant_derivative(frame, field, Eigen::VectorXd::Zero(frame.n), e));
    }
  }
  return DirectionalTensor(std::move(parts));
}

// ---------------------------------------------------------------------------
// Operator-level oracles: torsion form and curvature transformation evaluated
// from their definitions with finite-difference extension of the fields.

enum class CurvatureKind { R, P, Q };
enum class LiftKind { Horizontal, Vertical };

namespace detail {

/// Lift of a constant pi-vector to a vector field on the slit bundle, as (dx; dy).
inline Eigen::VectorXd lift_at(const ConnectionFrame& f, LiftKind kind, const Eigen::VectorXd& v) {
  Eigen::VectorXd w(2 * f.n);
  if (kind == LiftKind::Horizontal) {
    w << v, -f.N * v;
  } else {
    w << Eigen::VectorXd::Zero(f.n), v;
  }
  return w;
}

inline Eigen::MatrixXd conn_of(const ConnectionFrame& f, const Eigen::VectorXd& w) {
  return f.connection_matrix(w.head(f.n), w.tail(f.n));
}

}  // namespace detail

/// Matrix of 𝐑(X, Y) acting on constant Z̄ for lifted constant X̄, Ȳ.
inline Eigen::MatrixXd curvature_oracle_matrix(const FinslerStructure& L, const SlitPoint& p, LiftKind xk,
                                               const Eigen::VectorXd& xv, LiftKind yk, const Eigen::VectorXd& yv) {
  const int n = L.dim();
  const auto f0 = connection_frame(L, p);
  const Eigen::VectorXd X = detail::lift_at(f0, xk, xv), Y = detail::lift_at(f0, yk, yv);
  auto dx = [n](const Eigen::VectorXd& w) { return Eigen::VectorXd(w.head(n)); };
  auto dy = [n](const Eigen::VectorXd& w) { return Eigen::VectorXd(w.tail(n)); };

  // V_W(q) = connection matrix at q along the lifted field W(q)
  auto conn_field = [&](LiftKind kind, const Eigen::VectorXd& v) {
    return [&L, kind, v](const SlitPoint& q) {
      const auto f = connection_frame(L, q);
      return detail::flat(detail::conn_of(f, detail::lift_at(f, kind, v)));
    };
  };
  auto lift_field = [&](LiftKind kind, const Eigen::VectorXd& v) {
    return [&L, kind, v](const SlitPoint& q) {
      const auto f = connection_frame(L, q);
      const Eigen::VectorXd w = detail::lift_at(f, kind, v);
      return std::vector<double>(w.data(), w.data() + w.size());
    };
  };

  const Eigen::MatrixXd VX = detail::conn_of(f0, X), VY = detail::conn_of(f0, Y);
  const Eigen::MatrixXd Y_VX = detail::unflat(detail::directional_fd(conn_field(xk, xv), p, dx(Y), dy(Y)), n, n);
  const Eigen::MatrixXd X_VY = detail::unflat(detail::directional_fd(conn_field(yk, yv), p, dx(X), dy(X)), n, n);
  const auto XY = detail::directional_fd(lift_field(yk, yv), p, dx(X), dy(X));
  const auto YX = detail::directional_fd(lift_field(xk, xv), p, dx(Y), dy(Y));
  Eigen::VectorXd bracket(2 * n);
  for (int a = 0; a < 2 * n; ++a) bracket(a) = XY[static_cast<std::size_t>(a)] - YX[static_cast<std::size_t>(a)];

  return (Y_VX + detail::conn_of(f0, Y) * VX) - (X_VY + detail::conn_of(f0, X) * VY) + detail::conn_of(f0, bracket);
}

/// R, P or Q applied to (X̄, Ȳ, Z̄) from the commutator definition. Test oracle.
inline Eigen::VectorXd curvature_oracle(const FinslerStructure& L, const SlitPoint& p, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y, const Eigen::VectorXd& z, CurvatureKind which) {
  const LiftKind xk = which == CurvatureKind::R ? LiftKind::Horizontal : LiftKind::Vertical;
  const LiftKind yk = which == CurvatureKind::Q ? LiftKind::Vertical : LiftKind::Horizontal;
  return curvature_oracle_matrix(L, p, xk, x, yk, y) * z;
}

/// Torsion form 𝐓(X, Y) = ∇_X ρY - ∇_Y ρX - ρ[X, Y] for lifted constant X̄, Ȳ.
inline Eigen::VectorXd torsion_oracle(const FinslerStructure& L, const SlitPoint& p, LiftKind xk,
                                      const Eigen::VectorXd& xv, LiftKind yk, const Eigen::VectorXd& yv) {
  const int n = L.dim();
  const auto f0 = connection_frame(L, p);
  const Eigen::VectorXd X = detail::lift_at(f0, xk, xv), Y = detail::lift_at(f0, yk, yv);
  auto lift_field = [&](LiftKind kind, const Eigen::VectorXd& v) {
    return [&L, kind, v](const SlitPoint& q) {
      const auto f = connection_frame(L, q);
      const Eigen::VectorXd w = detail::lift_at(f, kind, v);
      return std::vector<double>(w.data(), w.data() + w.size());
    };
  };
  const auto XY = detail::directional_fd(lift_field(yk, yv), p, X.head(n), X.tail(n));
  const auto YX = detail::directional_fd(lift_field(xk, xv), p, Y.head(n), Y.tail(n));
  Eigen::VectorXd rhoY = Y.head(n), rhoX = X.head(n), X_rhoY(n), Y_rhoX(n), rho_bracket(n);
  for (int a = 0; a < n; ++a) {
    X_rhoY(a) = XY[static_cast<std::size_t>(a)];
    Y_rhoX(a) = YX[static_cast<std::size_t>(a)];
    rho_bracket(a) = X_rhoY(a) - Y_rhoX(a);
  }
  const Eigen::VectorXd nabla_X_rhoY = X_rhoY + detail::conn_of(f0, X) * rhoY;
  const Eigen::VectorXd nabla_Y_rhoX = Y_rhoX + detail::conn_of(f0, Y) * rhoX;
  return nabla_X_rhoY - nabla_Y_rhoX - rho_bracket;
}

// ---------------------------------------------------------------------------
// Special-manifold classification at sampled points.

struct ClassifyTolerances {
  double berwald = 1e-6;
  double landsberg = 1e-6;
  double curvature = 1e-6;
};

struct Classification {
  int samples = 0;
  double berwald_residual = 0.0;    // max |∇_{βX̄} T|
  double landsberg_residual = 0.0;  // max |P(X̄, Ȳ) η̄|
  double curvature_residual = 0.0;  // max |R|
  bool berwald = false;
  bool landsberg = false;
  bool locally_minkowskian = false;
};

/// Mixed torsion T = C^i_jk as a field (argument order is immaterial: C is symmetric).
inline TensorField torsion_field(const FinslerStructure& L) {
  return [&L](const SlitPoint& q) { return connection_frame(L, q).C; };
}

/// Berwald / Landsberg / curvature residuals at one point.
inline Classification classify_point(const FinslerStructure& L, const SlitPoint& p) {
  const auto [frame, cf] = full_frame(L, p);
  Classification c;
  c.samples = 1;
  c.berwald_residual = covariant_derivative_table(frame, torsion_field(L), true).max_abs();
  const int n = L.dim();
  const Eigen::VectorXd y = frame.y();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += cf.P(i, a, b, j) * y(j);
        c.landsberg_residual = std::max(c.landsberg_residual, std::abs(s));
      }
  c.curvature_residual = cf.R.max_abs();
  return c;
}

/// Verdicts hold at the sampled points only.
inline Classification classify(const FinslerStructure& L, int samples, std::uint64_t seed,
                               const ClassifyTolerances& tol = {}) {
  if (samples < 1) throw ConstructionError("classify needs at least one sample");
  Classification total;
  for (const auto& p : sample_points(L.domain(), L.dim(), samples, seed)) {
    const auto c = classify_point(L, p);
    total.berwald_residual = std::max(total.berwald_residual, c.berwald_residual);
    total.landsberg_residual = std::max(total.landsberg_residual, c.landsberg_residual);
    total.curvature_residual = std::max(total.curvature_residual, c.curvature_residual);
  }
  total.samples = samples;
  total.berwald = total.berwald_residual <= tol.berwald;
  total.landsberg = total.landsberg_residual <= tol.landsberg;
  total.locally_minkowskian = total.berwald && total.curvature_residual <= tol.curvature;
  return total;
}

}  // namespace finsler

#pragma once

// Difference of the Cartan connections of two structures L, L* on one chart:
//   ∇*_X Ȳ = ∇_X Ȳ + U(X, Ȳ),  A(X̄,Ȳ) = U(γX̄, Ȳ),  B(X̄,Ȳ) = U(βX̄, Ȳ),
//   N(X̄) = B(X̄, η̄),  N0 = N(η̄).
// β, γ, K are those of the unstarred structure L. Tensor slots follow the
// convention of cartan.hpp: A(i, a, b) is the i-th component of A(e_a, e_b).

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "finsler/cartan.hpp"
#include "finsler/error.hpp"
#include "finsler/structure.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

class StructurePair {
 public:
  StructurePair(FinslerStructure L, FinslerStructure Lstar)
      : L_(std::move(L)), Lstar_(std::move(Lstar)), domain_(intersect(L_.domain(), Lstar_.domain())) {
    if (L_.dim() != Lstar_.dim()) throw ConstructionError("structure pair: dimensions differ");
  }

  const FinslerStructure& L() const noexcept { return L_; }
  const FinslerStructure& Lstar() const noexcept { return Lstar_; }
  const Domain& domain() const noexcept { return domain_; }
  int dim() const noexcept { return L_.dim(); }
  std::string label() const { return L_.label() + " vs " + Lstar_.label(); }

 private:
  FinslerStructure L_, Lstar_;
  Domain domain_;
};

struct ComparisonFrame {
  ConnectionFrame frame, frame_star;
  Tensor A;               // (1,2)
  Tensor B;               // (1,2)
  Eigen::MatrixXd Ndiff;  // N as a matrix: N(X̄) = Ndiff X̄
  Eigen::VectorXd N0;

  int n() const noexcept { return frame.n; }
  Eigen::VectorXd a(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return apply(A, x, y); }
  Eigen::VectorXd b(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const { return apply(B, x, y); }
  /// U(X, Ȳ) for X = (dx, dy), assembled from A and B.
  Eigen::VectorXd u(const Eigen::VectorXd& dx, const Eigen::VectorXd& dy, const Eigen::VectorXd& y) const {
    return a(frame.connection_map(dx, dy), y) + b(dx, y);
  }
};

/// Assembles A and B from the connection coefficients of L and L* at one point.
inline ComparisonFrame assemble_comparison(ConnectionFrame f, ConnectionFrame s) {
  if (f.n != s.n) throw ConstructionError("comparison: frames of different dimension");
  ComparisonFrame c;
  c.frame = std::move(f);
  c.frame_star = std::move(s);
  const int n = c.frame.n;
  const auto& u = c.frame;
  const auto& v = c.frame_star;
  // K*(βX̄) = (N* - N) X̄; the starred vertical part acts through C*.
  const Eigen::MatrixXd dN = v.N - u.N;
  c.A = Tensor(n, 3, 1);
  c.B = Tensor(n, 3, 1);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        c.A(i, a, b) = v.C(i, b, a) - u.C(i, b, a);
        double w = v.Gamma(i, b, a) - u.Gamma(i, b, a);
        for (int m = 0; m < n; ++m) w += v.C(i, b, m) * dN(m, a);
        c.B(i, a, b) = w;
      }
  const Eigen::VectorXd y = u.y();
  c.Ndiff.resize(n, n);
  for (int a = 0; a < n; ++a) c.Ndiff.col(a) = apply(c.B, Eigen::VectorXd::Unit(n, a), y);
  c.N0 = c.Ndiff * y;
  return c;
}

inline ComparisonFrame comparison_frame(const StructurePair& pair, const SlitPoint& p) {
  if (!pair.domain().contains(p.x)) throw DomainError("point outside the common domain of " + pair.label());
  return assemble_comparison(connection_frame(pair.L(), p), connection_frame(pair.Lstar(), p));
}

/// U(X, Ȳ) = A(K(X), Ȳ) + B(ρX, Ȳ).
inline Eigen::VectorXd reconstruct_U(const ComparisonFrame& c, const Eigen::VectorXd& dx, const Eigen::VectorXd& dy,
                                     const Eigen::VectorXd& y) {
  return c.u(dx, dy, y);
}

/// ∇*_X Ȳ - ∇_X Ȳ straight from both connection matrices (Ȳ constant near p).
inline Eigen::VectorXd direct_U(const ComparisonFrame& c, const Eigen::VectorXd& dx, const Eigen::VectorXd& dy,
                                const Eigen::VectorXd& y) {
  return c.frame_star.connection_matrix(dx, dy) * y - c.frame.connection_matrix(dx, dy) * y;
}

struct TorsionRelations {
  double a = 0.0;  // max |T* - T - A|
  double b = 0.0;  // max |T*(N X̄, Ȳ) - T*(N Ȳ, X̄) - B(X̄,Ȳ) + B(Ȳ,X̄)|
};

inline TorsionRelations torsion_relations(const ComparisonFrame& c) {
  const int n = c.n();
  TorsionRelations r;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Eigen::VectorXd ea = Eigen::VectorXd::Unit(n, a), eb = Eigen::VectorXd::Unit(n, b);
      const Eigen::VectorXd ta = c.frame_star.torsion(ea, eb) - c.frame.torsion(ea, eb) - c.a(ea, eb);
      const Eigen::VectorXd tb = c.frame_star.torsion(c.Ndiff * ea, eb) - c.frame_star.torsion(c.Ndiff * eb, ea) -
                                 c.b(ea, eb) + c.b(eb, ea);
      r.a = std::max(r.a, ta.cwiseAbs().maxCoeff());
      r.b = std::max(r.b, tb.cwiseAbs().maxCoeff());
    }
  return r;
}

/// max over basis pairs of |R(e_a, e_b) η̄|.
inline double integrability_indicator(const CurvatureFrame& cf, const Eigen::VectorXd& y) {
  const int n = cf.R.n();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += cf.R(i, a, b, j) * y(j);
        worst = std::max(worst, std::abs(s));
      }
  return worst;
}

inline double integrability_indicator(const FinslerStructure& L, const SlitPoint& p) {
  return integrability_indicator(curvature_frame(L, p), Eigen::Map<const Eigen::VectorXd>(p.y.data(), L.dim()));
}

}  // namespace finsler

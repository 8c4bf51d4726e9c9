#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "finsler/finsler.hpp"

namespace fixtures {

using finsler::FinslerStructure;
using finsler::SlitPoint;

inline SlitPoint pt(std::vector<double> x, std::vector<double> y) { return {std::move(x), std::move(y)}; }

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double c : v) out(i++) = c;
  return out;
}

inline FinslerStructure euclidean(int n = 2) { return finsler::make_builtin("euclidean", n); }

/// Euclidean structure restricted to the unit ball.
inline FinslerStructure euclidean_ball(int n = 2) {
  auto e = euclidean(n);
  return FinslerStructure("euclidean_ball(" + std::to_string(n) + ")", n, finsler::Domain::ball(1.0), e.function());
}

inline FinslerStructure flat_randers(double b = 0.3) {
  return finsler::make_randers(euclidean(2), std::vector<double>{b, 0.0}, "flat_randers");
}

/// Randers over the Euclidean unit ball with b(x) = (0.2 (x^1)^2, 0).
inline FinslerStructure curved_randers() {
  auto b = [](auto x) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    return std::vector<T>{0.2 * x[0] * x[0], T(0.0)};
  };
  return finsler::make_randers(euclidean_ball(2), finsler::XField::from_generic(b), "curved_randers");
}

inline finsler::StructurePair generic_pair() { return finsler::StructurePair(euclidean_ball(2), curved_randers()); }
inline finsler::StructurePair flat_pair() { return finsler::StructurePair(euclidean(2), flat_randers()); }

inline std::vector<FinslerStructure> builtins(int n = 2) {
  std::vector<FinslerStructure> out;
  for (const char* name : {"euclidean", "klein", "funk", "minkowski_quartic", "sphere_chart"})
    out.push_back(finsler::make_builtin(name, n));
  return out;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace fixtures

namespace fixtures {

/// F^2 as a scalar function, for the finite-difference oracle.
inline finsler::ScalarFunction energy(const FinslerStructure& L) {
  return finsler::ScalarFunction::from_generic([f = L.function()](auto x, auto y) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    const T v = f.template at<T>(x, y);
    return v * v;
  });
}

/// Fundamental tensor from finite differences of F^2.
inline Eigen::MatrixXd fd_metric(const FinslerStructure& L, const SlitPoint& p) {
  const int n = L.dim();
  const auto E = energy(L);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * finsler::fd_oracle(E, p, {n + i, n + j});
  return g;
}

/// Spray coefficients by brute force: finite-difference partials of F^2 in the spray formula.
inline Eigen::VectorXd fd_spray(const FinslerStructure& L, const SlitPoint& p) {
  const int n = L.dim();
  const auto E = energy(L);
  Eigen::VectorXd w(n);
  for (int l = 0; l < n; ++l) {
    double s = -finsler::fd_oracle(E, p, {l});
    for (int k = 0; k < n; ++k) s += p.y[static_cast<std::size_t>(k)] * finsler::fd_oracle(E, p, {n + l, k});
    w(l) = s;
  }
  return 0.25 * fd_metric(L, p).inverse() * w;
}

}  // namespace fixtures

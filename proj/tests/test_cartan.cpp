#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace finsler;
using fixtures::pt;
using fixtures::vec;

namespace {

constexpr double kTol = 1e-8;

bool near_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * (1.0 + std::abs(a)); }

// a(x) = [[1 + x1^2, 0.3 x1 x2], [0.3 x1 x2, 2 + x2^2]]
FinslerStructure polynomial_riemannian() {
  auto a = XField::from_generic([](auto x) {
    using T = std::remove_const_t<typename decltype(x)::value_type>;
    return std::vector<T>{1.0 + x[0] * x[0], 0.3 * x[0] * x[1], 0.3 * x[0] * x[1], 2.0 + x[1] * x[1]};
  });
  return make_riemannian(2, a, "poly");
}

// Coefficients a(x) of a Riemannian structure read back from F^2 at fixed y-independent g.
Eigen::MatrixXd coeffs(const FinslerStructure& L, const Eigen::VectorXd& x) {
  const int n = L.dim();
  Eigen::MatrixXd a(n, n);
  // F^2 is a quadratic form in y: polarize with real evaluations only
  auto q = [&](const Eigen::VectorXd& y) {
    std::vector<double> xs(x.data(), x.data() + n), ys(y.data(), y.data() + n);
    const double f = L(xs, ys);
    return f * f;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd ei = Eigen::VectorXd::Unit(n, i), ej = Eigen::VectorXd::Unit(n, j);
      a(i, j) = 0.25 * (q(ei + ej) - q(ei - ej));
    }
  return a;
}

// Levi-Civita symbols Γ(i, j, k) from central differences of a(x) with one Richardson step.
Tensor christoffel(const FinslerStructure& L, const Eigen::VectorXd& x) {
  const int n = L.dim();
  std::vector<Eigen::MatrixXd> da(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto d = [&](double h) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k) * h;
      return Eigen::MatrixXd((coeffs(L, x + e) - coeffs(L, x - e)) / (2 * h));
    };
    da[static_cast<std::size_t>(k)] = (4 * d(5e-4) - d(1e-3)) / 3;
  }
  const Eigen::MatrixXd inv = coeffs(L, x).inverse();
  Tensor g(n, 3, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += inv(i, l) * (da[static_cast<std::size_t>(k)](l, j) + da[static_cast<std::size_t>(j)](l, k) -
                            da[static_cast<std::size_t>(l)](j, k));
        g(i, j, k) = 0.5 * s;
      }
  return g;
}

// Textbook Riemann tensor Rt(i, j, k, l) = i-th component of R(e_k, e_l) e_j.
Tensor riemann(const FinslerStructure& L, const Eigen::VectorXd& x) {
  const int n = L.dim();
  std::vector<Tensor> dg;
  for (int k = 0; k < n; ++k) {
    auto d = [&](double h) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, k) * h;
      return (christoffel(L, x + e) - christoffel(L, x - e)) * (1.0 / (2 * h));
    };
    dg.push_back((4.0 * d(5e-3) - d(1e-2)) * (1.0 / 3.0));
  }
  const Tensor G = christoffel(L, x);
  Tensor r(n, 4, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = dg[static_cast<std::size_t>(k)](i, l, j) - dg[static_cast<std::size_t>(l)](i, k, j);
          for (int m = 0; m < n; ++m) s += G(i, k, m) * G(m, l, j) - G(i, l, m) * G(m, k, j);
          r(i, j, k, l) = s;
        }
  return r;
}

Eigen::VectorXd xvec(const SlitPoint& p) { return Eigen::Map<const Eigen::VectorXd>(p.x.data(), p.dim()); }

std::vector<FinslerStructure> corpus() {
  auto all = fixtures::builtins(2);
  all.push_back(fixtures::flat_randers());
  all.push_back(fixtures::curved_randers());
  all.push_back(polynomial_riemannian());
  all.push_back(make_builtin("funk", 3));
  all.push_back(make_builtin("sphere_chart", 3));
  return all;
}

// Tensor field returning the fundamental tensor as a (0,2) tensor.
TensorField metric_field(const FinslerStructure& L) {
  return [&L](const SlitPoint& q) { return Tensor::from(connection_frame(L, q).g, 0); };
}

TensorField eta_field() {
  return [](const SlitPoint& q) { return Tensor::from(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(q.y.data(), q.dim()))); };
}

}  // namespace

TEST(ConnectionFrame, EuclideanIsFlat) {
  const auto f = connection_frame(fixtures::euclidean(), pt({0.3, -2}, {1, 0.5}));
  EXPECT_LE(fixtures::max_abs(f.g - Eigen::Matrix2d::Identity()), 1e-15);
  EXPECT_EQ(f.G.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(fixtures::max_abs(f.N), 0.0);
  EXPECT_LE(f.Gamma.max_abs(), 1e-15);
  EXPECT_LE(f.C.max_abs(), 1e-15);
}

TEST(ConnectionFrame, RiemannianMatchesLeviCivita) {
  for (const auto& L : {polynomial_riemannian(), make_builtin("sphere_chart", 2), make_builtin("sphere_chart", 3)})
    for (const auto& p : sample_points(L.domain(), L.dim(), 20, 12)) {
      const auto f = connection_frame(L, p);
      EXPECT_LE(f.C.max_abs(), 1e-12) << L.label();
      EXPECT_LE((f.Gamma - christoffel(L, xvec(p))).max_abs(), kTol) << L.label();
    }
}

TEST(ConnectionFrame, FlatRandersAgainstBruteForce) {
  const auto L = fixtures::flat_randers();
  for (const auto& p : sample_points(L.domain(), 2, 20, 2)) {
    const auto f = connection_frame(L, p);
    EXPECT_LE(f.G.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(fixtures::max_abs(f.N), 1e-12);
    EXPECT_LE(f.Gamma.max_abs(), 1e-12);
    EXPECT_GT(f.C.max_abs(), 1e-3);
    EXPECT_LE(fixtures::max_abs(f.g - fixtures::fd_metric(L, p)), 1e-8);
    const Eigen::VectorXd y = f.y();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int k = 0; k < 2; ++k) s += f.C_lower(i, j, k) * y(k);
        EXPECT_LE(std::abs(s), 1e-10);
      }
  }
}

TEST(ConnectionFrame, SprayMatchesBruteForce) {
  for (const auto& L : corpus())
    for (const auto& p : sample_points(L.domain(), L.dim(), 10, 8)) {
      const auto f = connection_frame(L, p);
      const Eigen::VectorXd fd = fixtures::fd_spray(L, p);
      for (int i = 0; i < L.dim(); ++i) EXPECT_TRUE(near_rel(f.G(i), fd(i), 1e-6)) << L.label() << " " << f.G(i) << " " << fd(i);
      EXPECT_LE((f.G - spray(L, p)).cwiseAbs().maxCoeff(), 1e-10 * (1 + f.G.norm()));
    }
}

TEST(ConnectionFrame, InvariantsAtSamples) {
  for (const auto& L : corpus()) {
    const int n = L.dim();
    for (const auto& p : sample_points(L.domain(), n, 100, 31)) {
      const auto f = connection_frame(L, p);
      const Eigen::VectorXd y = f.y();
      EXPECT_LE(fixtures::max_abs(f.g - f.g.transpose()), 1e-12);
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.g).eigenvalues().minCoeff(), 0.0);
      EXPECT_TRUE(near_rel(y.dot(f.g * y), f.F * f.F, 1e-9)) << L.label();
      EXPECT_LE(fixtures::max_abs(f.g * f.g_inv - Eigen::MatrixXd::Identity(n, n)), 1e-9);

      SlitPoint p2 = p;
      for (double& v : p2.y) v *= 2.0;
      const auto f2 = connection_frame(L, p2);
      const double scale = 1.0 + fixtures::max_abs(f.g);
      EXPECT_LE(fixtures::max_abs(f2.g - f.g), kTol * scale) << L.label();
      EXPECT_LE((f2.G - 4.0 * f.G).cwiseAbs().maxCoeff(), kTol * (1 + f2.G.cwiseAbs().maxCoeff())) << L.label();

      const double cs = 1.0 + f.C_lower.max_abs();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double contract = 0.0;
          for (int k = 0; k < n; ++k) {
            EXPECT_LE(std::abs(f.C_lower(i, j, k) - f.C_lower(j, i, k)), kTol * cs);
            EXPECT_LE(std::abs(f.C_lower(i, j, k) - f.C_lower(i, k, j)), kTol * cs);
            contract += f.C_lower(i, j, k) * y(k);
          }
          EXPECT_LE(std::abs(contract), kTol * cs * (1 + y.norm())) << L.label();
          // deflection: Γ^i_jk y^j = N^i_k
          double defl = 0.0;
          for (int k = 0; k < n; ++k) defl += f.Gamma(i, k, j) * y(k);
          EXPECT_LE(std::abs(defl - f.N(i, j)), kTol * (1 + std::abs(f.N(i, j)))) << L.label();
        }
    }
  }
}

// N = ∂G/∂y checked by finite differences of the order-2 spray.
TEST(ConnectionFrame, NonlinearConnectionIsSprayDerivative) {
  for (const auto& L : corpus())
    for (const auto& p : sample_points(L.domain(), L.dim(), 10, 17)) {
      const auto f = connection_frame(L, p);
      const int n = L.dim();
      for (int j = 0; j < n; ++j) {
        const auto d = detail::directional_fd(
            [&](const SlitPoint& q) {
              const Eigen::VectorXd G = spray(L, q);
              return std::vector<double>(G.data(), G.data() + n);
            },
            p, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Unit(n, j));
        for (int i = 0; i < n; ++i) EXPECT_TRUE(near_rel(f.N(i, j), d[static_cast<std::size_t>(i)], 1e-7)) << L.label();
      }
    }
}

TEST(ConnectionFrame, DegenerateMetricRaisesConvexityError) {
  EXPECT_THROW(connection_frame(make_builtin("minkowski_quartic", 2), pt({0, 0}, {1, 0})), ConvexityError);
  const auto bad = make_expression(parse_metric("abs(y1) + abs(y2)", 2), Domain::all());
  EXPECT_THROW(connection_frame(bad, pt({0, 0}, {1, 0.5})), ConvexityError);
}

TEST(CovariantDerivative, HorizontalMetricity) {
  for (const auto& L : corpus())
    for (const auto& p : sample_points(L.domain(), L.dim(), 5, 19))
      for (int k = 0; k < L.dim(); ++k) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(L.dim(), k);
        const Tensor d = covariant_deriv_h(L, metric_field(L), p, e);
        EXPECT_LE(d.max_abs(), 1e-6 * (1 + connection_frame(L, p).g.cwiseAbs().maxCoeff())) << L.label();
      }
}

TEST(CovariantDerivative, ConstantFieldOnFlatSpace) {
  const auto L = fixtures::euclidean();
  TensorField constant = [](const SlitPoint&) {
    Tensor t(2, 3, 1);
    for (std::size_t k = 0; k < t.size(); ++k) t.data()[k] = 0.1 * double(k);
    return t;
  };
  EXPECT_LE(covariant_deriv_h(L, constant, pt({1, 2}, {0.3, 0.4}), vec({1, -1})).max_abs(), 1e-12);
  EXPECT_LE(covariant_deriv_v(L, constant, pt({1, 2}, {0.3, 0.4}), vec({1, -1})).max_abs(), 1e-12);
}

TEST(CovariantDerivative, FundamentalVectorField) {
  for (const auto& L : corpus())
    for (const auto& p : sample_points(L.domain(), L.dim(), 5, 23)) {
      const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(L.dim(), 0.3, -0.7);
      EXPECT_LE(covariant_deriv_h(L, eta_field(), p, x).max_abs(), 1e-8) << L.label();
      EXPECT_LE((covariant_deriv_v(L, eta_field(), p, x).vector() - x).cwiseAbs().maxCoeff(), 1e-8) << L.label();
    }
}

TEST(CovariantDerivative, VerticalMetricity) {
  for (const auto& L : {make_builtin("sphere_chart", 2), fixtures::flat_randers(), fixtures::curved_randers()})
    for (const auto& p : sample_points(L.domain(), 2, 10, 29)) {
      const auto f = connection_frame(L, p);
      for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(2, k);
        EXPECT_LE(covariant_deriv_v(L, metric_field(L), p, e).max_abs(), 1e-8) << L.label();
        // without the connection terms the y-derivative of g is 2 C(e_k, ., .)
        const auto dg = detail::directional_fd([&](const SlitPoint& q) { return metric_field(L)(q).data(); }, p,
                                               Eigen::VectorXd::Zero(2), e);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            EXPECT_LE(std::abs(dg[static_cast<std::size_t>(i * 2 + j)] - 2 * f.C_lower(i, j, k)), 1e-8) << L.label();
      }
    }
}

TEST(Curvature, EuclideanIsFlat) {
  const auto c = curvature_frame(fixtures::euclidean(3), pt({1, 2, 3}, {0.1, 0.2, 0.3}));
  EXPECT_LE(c.R.max_abs(), 1e-14);
  EXPECT_LE(c.P.max_abs(), 1e-14);
  EXPECT_LE(c.Q.max_abs(), 1e-14);
}

// R(X,Y)Z = g(X,Z)Y - g(Y,Z)X for curvature 1 in this sign convention.
TEST(Curvature, SphereConstantCurvature) {
  for (int n : {2, 3}) {
    const auto L = make_builtin("sphere_chart", n);
    for (const auto& p : sample_points(L.domain(), n, 20, 41)) {
      const auto f = connection_frame(L, p);
      const auto c = curvature_frame(L, p);
      EXPECT_LE(c.P.max_abs(), kTol);
      EXPECT_LE(c.Q.max_abs(), kTol);
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int z = 0; z < n; ++z) {
              const double expect = f.g(a, z) * (b == i) - f.g(b, z) * (a == i);
              EXPECT_LE(std::abs(c.R(i, a, b, z) - expect), 1e-5);
            }
    }
  }
}

TEST(Curvature, RiemannianReduction) {
  for (const auto& L : {polynomial_riemannian(), make_builtin("sphere_chart", 2)})
    for (const auto& p : sample_points(L.domain(), 2, 10, 43)) {
      const auto c = curvature_frame(L, p);
      const Tensor rt = riemann(L, xvec(p));
      EXPECT_LE(c.P.max_abs(), kTol);
      EXPECT_LE(c.Q.max_abs(), kTol);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) EXPECT_LE(std::abs(c.R(i, k, l, j) + rt(i, j, k, l)), 1e-5) << L.label();
    }
}

// In dimension 2 the Cartan tensor has rank one and Q vanishes identically.
TEST(Curvature, MinkowskiNormIsFlatButNotRiemannian) {
  for (int n : {2, 3}) {
    const auto L = make_builtin("minkowski_quartic", n);
    for (const auto& p : sample_points(L.domain(), n, 20, 47)) {
      const auto c = curvature_frame(L, p);
      EXPECT_LE(c.R.max_abs(), 1e-10);
      EXPECT_LE(c.P.max_abs(), 1e-10);
      if (n == 2) {
        EXPECT_LE(c.Q.max_abs(), 1e-10);
      } else {
        EXPECT_GT(c.Q.max_abs(), 1e-3);
      }
    }
  }
}

TEST(Curvature, SymmetriesAndVerticalFormula) {
  for (const auto& L : corpus()) {
    const int n = L.dim();
    for (const auto& p : sample_points(L.domain(), n, 10, 53)) {
      const auto f = connection_frame(L, p);
      const auto c = curvature_frame(L, p);
      const double rs = 1 + c.R.max_abs(), qs = 1 + c.Q.max_abs();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              EXPECT_LE(std::abs(c.R(i, k, l, j) + c.R(i, l, k, j)), 1e-10 * rs);
              EXPECT_LE(std::abs(c.Q(i, k, l, j) + c.Q(i, l, k, j)), 1e-10 * qs);
              double q = 0.0;
              for (int m = 0; m < n; ++m) q += f.C(m, j, l) * f.C(i, m, k) - f.C(m, j, k) * f.C(i, m, l);
              EXPECT_LE(std::abs(c.Q(i, k, l, j) - q), kTol * qs) << L.label();
            }
    }
  }
}

TEST(Oracle, EuclideanVanishes) {
  const auto L = fixtures::euclidean();
  const auto p = pt({0.2, 0.1}, {1, 2});
  for (auto k : {CurvatureKind::R, CurvatureKind::P, CurvatureKind::Q})
    EXPECT_LE(curvature_oracle(L, p, vec({1, 0.5}), vec({-0.3, 1}), vec({2, 1}), k).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Oracle, AntisymmetricInArguments) {
  for (const auto& L : fixtures::builtins(2))
    for (const auto& p : sample_points(L.domain(), 2, 3, 59)) {
      const Eigen::VectorXd X = vec({0.7, -0.2}), Y = vec({0.1, 0.9}), Z = vec({1, 1});
      for (auto k : {CurvatureKind::R, CurvatureKind::Q}) {
        const Eigen::VectorXd a = curvature_oracle(L, p, X, Y, Z, k), b = curvature_oracle(L, p, Y, X, Z, k);
        EXPECT_LE((a + b).cwiseAbs().maxCoeff(), 1e-6) << L.label();
      }
    }
}

// Dual path: coefficient formulas against the commutator definition.
TEST(Oracle, MatchesCoefficientCurvature) {
  std::vector<FinslerStructure> all = fixtures::builtins(2);
  all.push_back(fixtures::curved_randers());
  for (const auto& L : all) {
    const int n = L.dim();
    double worst = 0.0;
    for (const auto& p : sample_points(L.domain(), n, 20, 61)) {
      const auto c = curvature_frame(L, p);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const Eigen::VectorXd X = Eigen::VectorXd::Unit(n, a), Y = Eigen::VectorXd::Unit(n, b);
          const Eigen::MatrixXd mr = curvature_oracle_matrix(L, p, LiftKind::Horizontal, X, LiftKind::Horizontal, Y);
          const Eigen::MatrixXd mp = curvature_oracle_matrix(L, p, LiftKind::Vertical, X, LiftKind::Horizontal, Y);
          const Eigen::MatrixXd mq = curvature_oracle_matrix(L, p, LiftKind::Vertical, X, LiftKind::Vertical, Y);
          for (int i = 0; i < n; ++i)
            for (int z = 0; z < n; ++z) {
              worst = std::max(worst, std::abs(mr(i, z) - c.R(i, a, b, z)));
              worst = std::max(worst, std::abs(mp(i, z) - c.P(i, a, b, z)));
              worst = std::max(worst, std::abs(mq(i, z) - c.Q(i, a, b, z)));
            }
        }
    }
    EXPECT_LE(worst, 1e-4) << L.label();
  }
}

TEST(Oracle, TorsionForm) {
  for (const auto& L : {fixtures::flat_randers(), fixtures::curved_randers(), make_builtin("funk", 2)})
    for (const auto& p : sample_points(L.domain(), 2, 5, 67)) {
      const auto f = connection_frame(L, p);
      const Eigen::VectorXd X = vec({0.4, -1}), Y = vec({1.2, 0.3});
      const Eigen::VectorXd mixed = torsion_oracle(L, p, LiftKind::Vertical, X, LiftKind::Horizontal, Y);
      EXPECT_LE((mixed - f.torsion(X, Y)).cwiseAbs().maxCoeff(), 1e-6) << L.label();
      EXPECT_LE((f.torsion(X, Y) - f.torsion(Y, X)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE(torsion_oracle(L, p, LiftKind::Horizontal, X, LiftKind::Horizontal, Y).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE(torsion_oracle(L, p, LiftKind::Vertical, X, LiftKind::Vertical, Y).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Classify, ReferenceStructures) {
  const auto e = classify(fixtures::euclidean(), 10, 1);
  EXPECT_TRUE(e.berwald && e.landsberg && e.locally_minkowskian);
  const auto q = classify(make_builtin("minkowski_quartic", 2), 10, 1);
  EXPECT_TRUE(q.berwald && q.landsberg && q.locally_minkowskian);
  EXPECT_LT(std::max({q.berwald_residual, q.landsberg_residual, q.curvature_residual}), 1e-8);
  const auto r = classify(fixtures::flat_randers(), 10, 1);
  EXPECT_TRUE(r.berwald && r.landsberg && r.locally_minkowskian);
  const auto s = classify(make_builtin("sphere_chart", 2), 10, 1);
  EXPECT_TRUE(s.berwald);
  EXPECT_TRUE(s.landsberg);
  EXPECT_FALSE(s.locally_minkowskian);
  EXPECT_GT(s.curvature_residual, 0.1);
  EXPECT_EQ(s.samples, 10);
  EXPECT_THROW(classify(fixtures::euclidean(), 0, 1), ConstructionError);
}

TEST(Classify, BerwaldResidualBoundsLandsberg) {
  std::vector<FinslerStructure> all = fixtures::builtins(2);
  all.push_back(fixtures::flat_randers());
  all.push_back(fixtures::curved_randers());
  for (const auto& L : all) {
    const auto c = classify(L, 10, 71);
    if (c.berwald) {
      EXPECT_TRUE(c.landsberg) << L.label();
    }
    EXPECT_LE(c.landsberg_residual, c.berwald_residual * (1 + 1e-9) + 1e-6) << L.label();
  }
}

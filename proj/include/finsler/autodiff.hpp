#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/jet.hpp"

namespace finsler {

/// Maximum total derivative order served by eval_jet.
inline constexpr int kMaxJetOrder = 4;

/// A point (x, y) of the slit tangent bundle in chart coordinates; y must be nonzero.
struct SlitPoint {
  std::vector<double> x;
  std::vector<double> y;

  int dim() const noexcept { return static_cast<int>(x.size()); }
};

template <class T>
using PointFn = std::function<T(std::span<const T> x, std::span<const T> y)>;

/// A scalar function of (x, y) evaluable on plain reals and on jets. The
/// optional long double path only serves the finite-difference oracle.
struct ScalarFunction {
  PointFn<double> real;
  PointFn<Jet> jet;
  PointFn<long double> extended = {};

  /// Wraps a generic callable `g(x, y)` usable with T = double, long double and Jet.
  template <class Generic>
  static ScalarFunction from_generic(Generic g) {
    return {[g](std::span<const double> x, std::span<const double> y) { return g(x, y); },
            [g](std::span<const Jet> x, std::span<const Jet> y) { return g(x, y); },
            [g](std::span<const long double> x, std::span<const long double> y) { return g(x, y); }};
  }

  double operator()(std::span<const double> x, std::span<const double> y) const { return real(x, y); }

  /// Evaluation dispatched on the scalar type; long double falls back to double when absent.
  template <class T>
  T at(std::span<const T> x, std::span<const T> y) const {
    if constexpr (std::is_same_v<T, double>) {
      return real(x, y);
    } else if constexpr (std::is_same_v<T, long double>) {
      if (extended) return extended(x, y);
      std::vector<double> xd(x.begin(), x.end()), yd(y.begin(), y.end());
      return real(xd, yd);
    } else {
      return jet(x, y);
    }
  }
};

/// Partials of a scalar at a slit point. Variables are ordered x^1..x^n, y^1..y^n.
class JetScalar {
 public:
  JetScalar(Jet jet, int dim) : jet_(std::move(jet)), dim_(dim) {}

  double value() const { return jet_.value(); }
  int dim() const noexcept { return dim_; }
  int order() const noexcept { return jet_.is_constant() ? Jet::kExact : jet_.valid_order(); }

  /// Partial along a multi-index given as a list of variable indices in [0, 2n).
  double partial(std::span<const int> directions) const { return jet_.partial(directions); }
  double partial(std::initializer_list<int> directions) const { return jet_.partial(directions); }

  static int x_var(int i) noexcept { return i; }
  int y_var(int i) const noexcept { return dim_ + i; }

  const Jet& jet() const noexcept { return jet_; }

 private:
  Jet jet_;
  int dim_;
};

namespace detail {

inline void check_point(const SlitPoint& p) {
  if (p.x.size() != p.y.size() || p.x.empty()) throw DomainError("slit point: x and y must have equal nonzero length");
  double norm = 0.0;
  for (double v : p.y) norm += v * v;
  if (!(norm > 0.0)) throw DomainError("slit point: y must be nonzero");
  for (double v : p.x)
    if (!std::isfinite(v)) throw DomainError("slit point: non-finite coordinate");
}

/// Independent jet variables for all 2n coordinates of p.
inline std::pair<std::vector<Jet>, std::vector<Jet>> seed_variables(const SlitPoint& p, int order) {
  const int n = p.dim();
  const auto& layout = JetLayout::get(2 * n, order);
  std::vector<Jet> xs, ys;
  xs.reserve(static_cast<std::size_t>(n));
  ys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs.push_back(Jet::variable(layout, i, p.x[static_cast<std::size_t>(i)]));
    ys.push_back(Jet::variable(layout, n + i, p.y[static_cast<std::size_t>(i)]));
  }
  return {std::move(xs), std::move(ys)};
}

}  // namespace detail

/// All mixed partials of f at p up to `order` (<= 4).
inline JetScalar eval_jet(const ScalarFunction& f, const SlitPoint& p, int order) {
  if (order < 0) throw CapabilityError("jet order must be non-negative");
  if (order > kMaxJetOrder) throw CapabilityError("jet order " + std::to_string(order) + " exceeds 4");
  detail::check_point(p);
  auto [xs, ys] = detail::seed_variables(p, order);
  return JetScalar(f.jet(xs, ys), p.dim());
}

/// Central finite-difference estimate of one mixed partial, refined by one
/// Richardson step. Test-only oracle, independent of the jet engine.
///
/// The default step for a derivative of total order m is base(m)*(1+|coordinate|),
/// with base(1) = 1e-5 and larger bases for higher orders to balance round-off.
/// Evaluation runs in long double when the function provides that path.
inline double fd_oracle(const ScalarFunction& f, const SlitPoint& p, std::span<const int> directions,
                        std::optional<double> base_step = std::nullopt) {
  detail::check_point(p);
  const int n = p.dim();
  const int total = static_cast<int>(directions.size());
  if (total > kMaxJetOrder) throw CapabilityError("fd_oracle supports total order <= 4");
  std::vector<int> alpha(static_cast<std::size_t>(2 * n), 0);
  for (int d : directions) {
    if (d < 0 || d >= 2 * n) throw CapabilityError("fd_oracle direction out of range");
    ++alpha[static_cast<std::size_t>(d)];
  }

  using Real = long double;
  std::vector<Real> coords(p.x.begin(), p.x.end());
  coords.insert(coords.end(), p.y.begin(), p.y.end());
  auto eval = [&](const std::vector<Real>& c) -> Real {
    std::span<const Real> all(c);
    const auto nx = static_cast<std::size_t>(n);
    if (f.extended) return f.extended(all.subspan(0, nx), all.subspan(nx));
    std::vector<double> d(c.begin(), c.end());
    std::span<const double> dd(d);
    return f.real(dd.subspan(0, nx), dd.subspan(nx));
  };
  if (total == 0) return static_cast<double>(eval(coords));

  static constexpr std::array<double, 5> kBase = {0.0, 1e-5, 1e-3, 3e-3, 1e-2};
  const double base = base_step.value_or(kBase[static_cast<std::size_t>(total)]);

  struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;
  };
  auto stencil = [](int m) -> Stencil {
    switch (m) {
      case 1: return {{-1, 1}, {-0.5, 0.5}};
      case 2: return {{-1, 0, 1}, {1.0, -2.0, 1.0}};
      case 3: return {{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}};
      default: return {{-2, -1, 0, 1, 2}, {1.0, -4.0, 6.0, -4.0, 1.0}};
    }
  };

  std::vector<int> vars;
  std::vector<Stencil> stencils;
  std::vector<Real> steps;
  for (int v = 0; v < 2 * n; ++v) {
    const int m = alpha[static_cast<std::size_t>(v)];
    if (m == 0) continue;
    const Real c = coords[static_cast<std::size_t>(v)];
    const Real h = base * (1.0L + std::abs(c));
    if (!(h > 0.0L) || !std::isfinite(h) || (c + 0.5L * h) - c == 0.0L)
      throw OracleError("finite-difference step underflow");
    vars.push_back(v);
    stencils.push_back(stencil(m));
    steps.push_back(h);
  }

  auto estimate = [&](Real scale) {
    Real sum = 0.0L;
    std::vector<std::size_t> pick(vars.size(), 0);
    while (true) {
      std::vector<Real> c = coords;
      Real w = 1.0L;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        const Real h = steps[k] * scale;
        c[static_cast<std::size_t>(vars[k])] += stencils[k].offsets[pick[k]] * h;
        w *= stencils[k].weights[pick[k]] / std::pow(h, alpha[static_cast<std::size_t>(vars[k])]);
      }
      sum += w * eval(c);
      std::size_t k = 0;
      for (; k < vars.size(); ++k) {
        if (++pick[k] < stencils[k].offsets.size()) break;
        pick[k] = 0;
      }
      if (k == vars.size()) break;
    }
    return sum;
  };
  const Real coarse = estimate(1.0L);
  const Real fine = estimate(0.5L);
  return static_cast<double>((4.0L * fine - coarse) / 3.0L);
}

inline double fd_oracle(const ScalarFunction& f, const SlitPoint& p, std::initializer_list<int> directions,
                        std::optional<double> base_step = std::nullopt) {
  return fd_oracle(f, p, std::span<const int>(directions.begin(), directions.size()), base_step);
}

}  // namespace finsler

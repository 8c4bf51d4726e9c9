#pragma once

// Truncated multivariate Taylor arithmetic.
//
// A Jet stores the Taylor coefficients f^(a)/a! of a scalar function of
// `nvars` variables for every multi-index a with |a| <= valid_order().
// Monomials are ordered by total degree, so truncating to a lower order is a
// prefix of the coefficient vector. Products and compositions are exact up to
// the smaller valid order of their operands; differentiation lowers the valid
// order by one. Plain doubles convert implicitly to constant jets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "finsler/error.hpp"

namespace finsler {

class JetLayout {
 public:
  static constexpr int kMaxVars = 8;

  struct MulTerm {
    std::uint16_t a, b, c;
  };
  struct DerivTerm {
    std::uint16_t src, dst;
    double factor;
  };

  /// Shared, immutable layout for (nvars, order); safe to call concurrently.
  static const JetLayout& get(int nvars, int order) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::unique_ptr<JetLayout>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[{nvars, order}];
    if (!slot) slot.reset(new JetLayout(nvars, order));
    return *slot;
  }

  int nvars() const noexcept { return nvars_; }
  int order() const noexcept { return order_; }
  int size() const noexcept { return static_cast<int>(degree_.size()); }
  int size_up_to(int degree) const noexcept {
    return prefix_[static_cast<std::size_t>(std::clamp(degree, 0, order_))];
  }
  int degree(int idx) const noexcept { return degree_[static_cast<std::size_t>(idx)]; }
  int exponent(int idx, int var) const noexcept {
    return exps_[static_cast<std::size_t>(idx * nvars_ + var)];
  }
  /// Product of factorials of the multi-index: converts coefficients to partials.
  double factorial_weight(int idx) const noexcept { return weight_[static_cast<std::size_t>(idx)]; }

  /// Index of a monomial, or -1 when its degree exceeds the layout order.
  int index_of(std::span<const int> exponents) const {
    int key = 0, stride = 1, total = 0;
    for (int v = 0; v < nvars_; ++v) {
      int e = exponents[static_cast<std::size_t>(v)];
      if (e < 0) return -1;
      total += e;
      if (total > order_) return -1;
      key += e * stride;
      stride *= order_ + 1;
    }
    return lookup_[static_cast<std::size_t>(key)];
  }

  /// Product terms whose result degree is <= `degree`, as a span prefix.
  std::span<const MulTerm> mul_terms(int degree) const {
    return {mul_.data(), mul_end_[static_cast<std::size_t>(std::clamp(degree, 0, order_))]};
  }
  std::span<const DerivTerm> deriv_terms(int var) const { return deriv_[static_cast<std::size_t>(var)]; }

 private:
  JetLayout(int nvars, int order) : nvars_(nvars), order_(order) {
    if (nvars < 1 || nvars > kMaxVars)
      throw CapabilityError("jet layout supports 1.." + std::to_string(kMaxVars) + " variables");
    if (order < 0) throw CapabilityError("negative jet order");

    std::vector<int> e(static_cast<std::size_t>(nvars), 0);
    std::vector<std::vector<int>> by_degree;
    // enumerate all exponent tuples with total degree <= order
    std::vector<std::vector<int>> all;
    auto rec = [&](auto&& self, int v, int remaining) -> void {
      if (v == nvars) {
        all.push_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[static_cast<std::size_t>(v)] = k;
        self(self, v + 1, remaining - k);
      }
      e[static_cast<std::size_t>(v)] = 0;
    };
    rec(rec, 0, order);
    auto deg = [](const std::vector<int>& x) {
      int s = 0;
      for (int k : x) s += k;
      return s;
    };
    std::stable_sort(all.begin(), all.end(),
                     [&](const auto& a, const auto& b) { return deg(a) < deg(b); });

    int stride_total = 1;
    for (int v = 0; v < nvars; ++v) stride_total *= order + 1;
    lookup_.assign(static_cast<std::size_t>(stride_total), -1);
    prefix_.assign(static_cast<std::size_t>(order + 1), 0);
    for (std::size_t idx = 0; idx < all.size(); ++idx) {
      const auto& x = all[idx];
      int key = 0, stride = 1;
      double w = 1.0;
      for (int v = 0; v < nvars; ++v) {
        int k = x[static_cast<std::size_t>(v)];
        exps_.push_back(static_cast<std::uint8_t>(k));
        key += k * stride;
        stride *= order + 1;
        for (int f = 2; f <= k; ++f) w *= f;
      }
      lookup_[static_cast<std::size_t>(key)] = static_cast<int>(idx);
      degree_.push_back(deg(x));
      weight_.push_back(w);
    }
    for (int d = 0; d <= order; ++d)
      prefix_[static_cast<std::size_t>(d)] = static_cast<int>(
          std::count_if(degree_.begin(), degree_.end(), [d](int k) { return k <= d; }));

    const int n = size();
    std::vector<int> sum(static_cast<std::size_t>(nvars));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (degree_[a] + degree_[b] > order) continue;
        for (int v = 0; v < nvars; ++v) sum[v] = exponent(a, v) + exponent(b, v);
        mul_.push_back({static_cast<std::uint16_t>(a), static_cast<std::uint16_t>(b),
                        static_cast<std::uint16_t>(index_of(sum))});
      }
    std::stable_sort(mul_.begin(), mul_.end(),
                     [&](const MulTerm& l, const MulTerm& r) { return degree_[l.c] < degree_[r.c]; });
    mul_end_.assign(static_cast<std::size_t>(order + 1), 0);
    for (int d = 0; d <= order; ++d)
      mul_end_[static_cast<std::size_t>(d)] = static_cast<std::size_t>(std::count_if(
          mul_.begin(), mul_.end(), [&](const MulTerm& t) { return degree_[t.c] <= d; }));

    deriv_.resize(static_cast<std::size_t>(nvars));
    for (int v = 0; v < nvars; ++v)
      for (int c = 0; c < n; ++c) {
        int k = exponent(c, v);
        if (k == 0) continue;
        for (int u = 0; u < nvars; ++u) sum[u] = exponent(c, u) - (u == v ? 1 : 0);
        deriv_[static_cast<std::size_t>(v)].push_back(
            {static_cast<std::uint16_t>(c), static_cast<std::uint16_t>(index_of(sum)), double(k)});
      }
  }

  int nvars_;
  int order_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degree_;
  std::vector<double> weight_;
  std::vector<int> prefix_;
  std::vector<int> lookup_;
  std::vector<MulTerm> mul_;
  std::vector<std::size_t> mul_end_;
  std::vector<std::vector<DerivTerm>> deriv_;
};

class Jet {
 public:
  /// Valid order reported by constants: exact to any order.
  static constexpr int kExact = 1 << 20;

  Jet() : coeffs_{0.0} {}
  Jet(double value) : coeffs_{value} {}  // NOLINT: implicit by design of generic evaluation

  /// The independent variable `var` of `layout`, expanded around `value`.
  static Jet variable(const JetLayout& layout, int var, double value) {
    Jet j;
    j.layout_ = &layout;
    j.valid_ = layout.order();
    j.coeffs_.assign(static_cast<std::size_t>(layout.size()), 0.0);
    j.coeffs_[0] = value;
    if (layout.order() >= 1) {
      std::vector<int> e(static_cast<std::size_t>(layout.nvars()), 0);
      e[static_cast<std::size_t>(var)] = 1;
      j.coeffs_[static_cast<std::size_t>(layout.index_of(e))] = 1.0;
    }
    return j;
  }

  double value() const noexcept { return coeffs_[0]; }
  bool is_constant() const noexcept { return layout_ == nullptr; }
  int valid_order() const noexcept { return layout_ ? valid_ : kExact; }
  const JetLayout* layout() const noexcept { return layout_; }

  /// Taylor coefficient of monomial `idx`.
  double coeff(int idx) const {
    if (idx == 0) return coeffs_[0];
    if (!layout_ || idx >= static_cast<int>(coeffs_.size())) return 0.0;
    return coeffs_[static_cast<std::size_t>(idx)];
  }

  /// Mixed partial derivative; `directions` lists variable indices, repeats allowed.
  double partial(std::span<const int> directions) const {
    if (directions.empty()) return value();
    if (!layout_) return 0.0;
    if (static_cast<int>(directions.size()) > valid_) throw CapabilityError("partial beyond jet order");
    std::vector<int> e(static_cast<std::size_t>(layout_->nvars()), 0);
    for (int d : directions) {
      if (d < 0 || d >= layout_->nvars()) throw CapabilityError("partial direction out of range");
      ++e[static_cast<std::size_t>(d)];
    }
    int idx = layout_->index_of(e);
    return coeffs_[static_cast<std::size_t>(idx)] * layout_->factorial_weight(idx);
  }
  double partial(std::initializer_list<int> directions) const {
    return partial(std::span<const int>(directions.begin(), directions.size()));
  }

  /// d/d(var); lowers the valid order by one.
  Jet derivative(int var) const {
    if (!layout_) return Jet(0.0);
    if (valid_ == 0) throw CapabilityError("derivative of an order-0 jet");
    Jet r = blank(*layout_, valid_ - 1);
    const auto n = r.coeffs_.size();
    for (const auto& t : layout_->deriv_terms(var))
      if (t.dst < n) r.coeffs_[t.dst] += t.factor * coeffs_[t.src];
    return r;
  }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator-(const Jet& a) {
    Jet r = a;
    for (auto& c : r.coeffs_) c = -c;
    return r;
  }

  friend Jet operator+(const Jet& a, const Jet& b) { return combine(a, b, 1.0); }
  friend Jet operator-(const Jet& a, const Jet& b) { return combine(a, b, -1.0); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (a.is_constant()) return scaled(b, a.value());
    if (b.is_constant()) return scaled(a, b.value());
    const int valid = std::min(a.valid_, b.valid_);
    Jet r = blank(*a.layout_, valid);
    for (const auto& t : a.layout_->mul_terms(valid)) r.coeffs_[t.c] += a.coeffs_[t.a] * b.coeffs_[t.b];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.is_constant()) {
      if (b.value() == 0.0) throw EvaluationError("division by zero");
      return scaled(a, 1.0 / b.value());
    }
    return a * reciprocal(b);
  }

  /// f(u) given f and its derivatives at u.value(): derivs[k] = f^(k)(u0).
  static Jet compose(const Jet& u, std::span<const double> derivs) {
    if (u.is_constant()) return Jet(derivs[0]);
    const int valid = u.valid_;
    Jet h = u;
    h.coeffs_[0] = 0.0;
    Jet r = blank(*u.layout_, valid);
    r.coeffs_[0] = derivs[0];
    Jet power = h;
    double inv_fact = 1.0;
    for (int k = 1; k <= valid; ++k) {
      inv_fact /= k;
      const double w = derivs[static_cast<std::size_t>(k)] * inv_fact;
      for (std::size_t i = 0; i < r.coeffs_.size(); ++i) r.coeffs_[i] += w * power.coeffs_[i];
      if (k < valid) power = power * h;
    }
    return r;
  }

  static Jet reciprocal(const Jet& u) {
    const double u0 = u.value();
    if (u0 == 0.0) throw EvaluationError("division by zero");
    std::vector<double> d(static_cast<std::size_t>(derivs_needed(u)));
    double p = 1.0 / u0, coef = 1.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      d[k] = coef * p;
      coef *= -double(k + 1);
      p /= u0;
    }
    return compose(u, d);
  }

  /// Number of derivative values compose() needs for `u`.
  static int derivs_needed(const Jet& u) { return u.is_constant() ? 1 : u.valid_ + 1; }

 private:
  static Jet blank(const JetLayout& layout, int valid) {
    Jet r;
    r.layout_ = &layout;
    r.valid_ = valid;
    r.coeffs_.assign(static_cast<std::size_t>(layout.size_up_to(valid)), 0.0);
    return r;
  }

  static Jet scaled(const Jet& a, double s) {
    Jet r = a;
    for (auto& c : r.coeffs_) c *= s;
    return r;
  }

  static Jet combine(const Jet& a, const Jet& b, double sign) {
    if (b.is_constant()) {
      Jet r = a;
      r.coeffs_[0] += sign * b.value();
      return r;
    }
    if (a.is_constant()) {
      Jet r = scaled(b, sign);
      r.coeffs_[0] += a.value();
      return r;
    }
    const int valid = std::min(a.valid_, b.valid_);
    Jet r = blank(*a.layout_, valid);
    for (std::size_t i = 0; i < r.coeffs_.size(); ++i) r.coeffs_[i] = a.coeffs_[i] + sign * b.coeffs_[i];
    return r;
  }

  const JetLayout* layout_ = nullptr;
  int valid_ = 0;
  std::vector<double> coeffs_;
};

// Elementary functions. Each validates its argument at the expansion point and
// raises EvaluationError on singular input rather than producing NaN.

inline Jet exp(const Jet& u) {
  const double e = std::exp(u.value());
  std::vector<double> d(static_cast<std::size_t>(Jet::derivs_needed(u)), e);
  return Jet::compose(u, d);
}

inline Jet log(const Jet& u) {
  const double u0 = u.value();
  if (!(u0 > 0.0)) throw EvaluationError("log of non-positive value");
  std::vector<double> d(static_cast<std::size_t>(Jet::derivs_needed(u)));
  d[0] = std::log(u0);
  double coef = 1.0, p = 1.0 / u0;
  for (std::size_t k = 1; k < d.size(); ++k) {
    d[k] = coef * p;
    coef *= -double(k);
    p /= u0;
  }
  return Jet::compose(u, d);
}

/// u^r for real r; requires u > 0 unless r is a non-negative integer.
inline Jet pow(const Jet& u, double r) {
  if (r == std::floor(r) && std::abs(r) <= 64) {
    const int k = static_cast<int>(std::abs(r));
    Jet result(1.0), base = u;
    for (int e = k; e > 0; e >>= 1) {
      if (e & 1) result = result * base;
      if (e > 1) base = base * base;
    }
    return r < 0 ? Jet(1.0) / result : result;
  }
  const double u0 = u.value();
  if (!(u0 > 0.0)) throw EvaluationError("non-integer power of non-positive value");
  std::vector<double> d(static_cast<std::size_t>(Jet::derivs_needed(u)));
  double coef = 1.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    d[k] = coef * std::pow(u0, r - double(k));
    coef *= r - double(k);
  }
  return Jet::compose(u, d);
}

inline Jet sqrt(const Jet& u) {
  if (u.is_constant()) {
    if (u.value() < 0.0) throw EvaluationError("sqrt of negative value");
    return Jet(std::sqrt(u.value()));
  }
  if (!(u.value() > 0.0)) throw EvaluationError("sqrt of non-positive value is not differentiable");
  return pow(u, 0.5);
}

inline Jet sin(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cycle[4] = {s, c, -s, -c};
  std::vector<double> d(static_cast<std::size_t>(Jet::derivs_needed(u)));
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = cycle[k % 4];
  return Jet::compose(u, d);
}

inline Jet cos(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double cycle[4] = {c, -s, -c, s};
  std::vector<double> d(static_cast<std::size_t>(Jet::derivs_needed(u)));
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = cycle[k % 4];
  return Jet::compose(u, d);
}

inline Jet abs(const Jet& u) {
  if (u.is_constant()) return Jet(std::abs(u.value()));
  if (u.value() == 0.0) throw EvaluationError("abs is not differentiable at zero");
  return u.value() > 0.0 ? u : -u;
}

}  // namespace finsler

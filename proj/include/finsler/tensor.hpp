#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace finsler {

/// Dense coefficient array of a pi-tensor in chart coordinates.
///
/// All indices range over 0..n-1 and are stored row-major. The first `upper`
/// indices are contravariant (output slots), the rest covariant (argument
/// slots). For a (1,q) tensor A, A(i, a, b) is the i-th component of A(e_a, e_b).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int rank, int upper = 1)
      : n_(n), rank_(rank), upper_(upper), data_(static_cast<std::size_t>(ipow(n, rank)), 0.0) {}

  static Tensor from(const Eigen::VectorXd& v) {
    Tensor t(static_cast<int>(v.size()), 1, 1);
    for (int i = 0; i < v.size(); ++i) t.data_[static_cast<std::size_t>(i)] = v(i);
    return t;
  }
  /// (1,1) tensor from a matrix acting on column vectors: M(i, j) = i-th component of M e_j.
  static Tensor from(const Eigen::MatrixXd& m, int upper = 1) {
    Tensor t(static_cast<int>(m.rows()), 2, upper);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) t(i, j) = m(i, j);
    return t;
  }

  int n() const noexcept { return n_; }
  int rank() const noexcept { return rank_; }
  int upper() const noexcept { return upper_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  template <class... I>
  double& operator()(I... idx) {
    return data_[offset(idx...)];
  }
  template <class... I>
  double operator()(I... idx) const {
    return data_[offset(idx...)];
  }

  Eigen::VectorXd vector() const {
    assert(rank_ == 1);
    return Eigen::Map<const Eigen::VectorXd>(data_.data(), n_);
  }
  Eigen::MatrixXd matrix() const {
    assert(rank_ == 2);
    Eigen::MatrixXd m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Tensor& operator+=(const Tensor& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }

 private:
  static int ipow(int b, int e) {
    int r = 1;
    while (e-- > 0) r *= b;
    return r;
  }
  template <class... I>
  std::size_t offset(I... idx) const {
    assert(sizeof...(I) == static_cast<std::size_t>(rank_));
    std::size_t off = 0;
    ((off = off * static_cast<std::size_t>(n_) + static_cast<std::size_t>(idx)), ...);
    return off;
  }

  int n_ = 0;
  int rank_ = 0;
  int upper_ = 0;
  std::vector<double> data_;
};

/// Output of a (1,2) tensor on two arguments: out^i = T(i, a, b) X^a Y^b.
inline Eigen::VectorXd apply(const Tensor& t, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const int n = t.n();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out(i) += t(i, a, b) * x(a) * y(b);
  return out;
}

/// Output of a (1,3) tensor on three arguments: out^i = T(i, a, b, c) X^a Y^b Z^c.
inline Eigen::VectorXd apply(const Tensor& t, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& z) {
  const int n = t.n();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) out(i) += t(i, a, b, c) * x(a) * y(b) * z(c);
  return out;
}

/// Tensor-valued linear function of a direction, stored per basis direction.
class DirectionalTensor {
 public:
  DirectionalTensor() = default;
  explicit DirectionalTensor(std::vector<Tensor> per_basis) : parts_(std::move(per_basis)) {}

  Tensor along(const Eigen::VectorXd& x) const {
    Tensor out = parts_.front() * 0.0;
    for (std::size_t k = 0; k < parts_.size(); ++k) out += parts_[k] * x(static_cast<Eigen::Index>(k));
    return out;
  }
  const Tensor& basis(int k) const { return parts_[static_cast<std::size_t>(k)]; }
  double max_abs() const {
    double m = 0.0;
    for (const auto& t : parts_) m = std::max(m, t.max_abs());
    return m;
  }

 private:
  std::vector<Tensor> parts_;
};

}  // namespace finsler

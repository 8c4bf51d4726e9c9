#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "finsler/autodiff.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// Seeded generator with platform-independent uniform and normal draws.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; both variates are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::VectorXd unit_vector(int n) {
    Eigen::VectorXd v(n);
    do {
      for (int i = 0; i < n; ++i) v(i) = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// x uniform in the domain's sampling region (rejection inside balls), y uniform
/// on the unit sphere scaled by a factor in [0.5, 2].
inline std::vector<SlitPoint> sample_points(const Domain& domain, int n, int count, std::uint64_t seed) {
  SampleRng rng(seed);
  const double extent = domain.sample_extent();
  std::vector<SlitPoint> pts;
  pts.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(pts.size()) < count) {
    std::vector<double> x(static_cast<std::size_t>(n));
    double r2 = 0.0;
    for (auto& v : x) {
      v = rng.uniform(-extent, extent);
      r2 += v * v;
    }
    if (domain.kind == Domain::Kind::Ball && r2 >= extent * extent) continue;
    const Eigen::VectorXd u = rng.unit_vector(n) * rng.uniform(0.5, 2.0);
    pts.push_back({std::move(x), std::vector<double>(u.data(), u.data() + n)});
  }
  return pts;
}

}  // namespace finsler

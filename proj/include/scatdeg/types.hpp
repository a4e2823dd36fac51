#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace scatdeg {

// Configuration-space vectors are 2- or 3-dimensional; a fixed inline buffer
// keeps them off the heap in the integrator hot loops.
template <typename Scalar>
using VecN = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;
template <typename Scalar>
using MatN = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

// ODE state: position/momentum/time in any chart (largest: KS, 4+4+1).
template <typename Scalar>
using StateVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 9, 1>;

using Vec = VecN<double>;
using Mat = MatN<double>;
using State = StateVec<double>;

inline constexpr double kPi = std::numbers::pi;

template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  // into (-pi, pi]
  Scalar r = std::remainder(a, Scalar(2 * kPi));
  if (r <= -Scalar(kPi)) r += Scalar(2 * kPi);
  return r;
}

template <typename Scalar>
VecN<Scalar> rotate90(const VecN<Scalar>& v) {
  VecN<Scalar> r(2);
  r << -v(1), v(0);
  return r;
}

template <typename Scalar>
Scalar cross2(const VecN<Scalar>& a, const VecN<Scalar>& b) {
  return a(0) * b(1) - a(1) * b(0);
}

inline Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

inline Vec vec3(double x, double y, double z) {
  Vec v(3);
  v << x, y, z;
  return v;
}

inline Vec unit_angle(double angle) { return vec2(std::cos(angle), std::sin(angle)); }

}  // namespace scatdeg

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "scatdeg/types.hpp"

namespace scatdeg {

template <typename T>
double magnitude(const T& v) {
  if constexpr (std::is_arithmetic_v<T>) return std::abs(v);
  else return v.norm();
}

template <typename T>
struct QuadratureResult {
  T value;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod nodes on [-1,1] (non-negative half) with Kronrod and the
// embedded 7-point Gauss weights.
inline constexpr std::array<double, 8> kXk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename T, typename F>
void gk15(F& f, double a, double b, T& value, double& error) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const T fc = f(c);
  T kron = kWk[7] * fc;
  T gauss = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const T s = f(c - h * kXk[j]) + f(c + h * kXk[j]);
    kron = kron + kWk[j] * s;
    if (j % 2 == 1) gauss = gauss + kWg[j / 2] * s;
  }
  value = h * kron;
  error = magnitude(T(h * (kron - gauss)));
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (7,15) on a finite interval. The integrand
// may be scalar or any Eigen vector type.
template <typename T, typename F>
QuadratureResult<T> integrate_gk(F f, double a, double b, double abs_tol, double rel_tol,
                                 int max_intervals = 2000) {
  struct Piece {
    double a, b;
    T value;
    double error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  QuadratureResult<T> out;
  std::priority_queue<Piece> heap;
  Piece first{a, b, T(), 0.0};
  detail::gk15<T>(f, a, b, first.value, first.error);
  out.evaluations = 15;
  T total = first.value;
  double err = first.error;
  heap.push(first);
  while (err > std::max(abs_tol, rel_tol * magnitude(total)) &&
         static_cast<int>(heap.size()) < max_intervals) {
    Piece worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    if (!(m > worst.a && m < worst.b)) {
      heap.push(worst);
      break;
    }
    Piece l{worst.a, m, T(), 0.0}, r{m, worst.b, T(), 0.0};
    detail::gk15<T>(f, l.a, l.b, l.value, l.error);
    detail::gk15<T>(f, r.a, r.b, r.value, r.error);
    out.evaluations += 30;
    total = total - worst.value + l.value + r.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  // resum to shed accumulated cancellation
  T sum = heap.top().value;
  double esum = 0.0;
  bool first_piece = true;
  while (!heap.empty()) {
    if (!first_piece) sum = sum + heap.top().value;
    first_piece = false;
    esum += heap.top().error;
    heap.pop();
  }
  out.value = sum;
  out.error = esum;
  out.converged = esum <= std::max(abs_tol, rel_tol * magnitude(sum));
  return out;
}

// Integral over [a, inf) via sigma = a + L (1 - x) / x, x in (0, 1].
template <typename T, typename F>
QuadratureResult<T> integrate_gk_to_infinity(F f, double a, double scale, double abs_tol,
                                             double rel_tol, int max_intervals = 2000) {
  auto g = [&](double x) -> T {
    const double s = a + scale * (1.0 - x) / x;
    return T((scale / (x * x)) * f(s));
  };
  return integrate_gk<T>(g, 0.0, 1.0, abs_tol, rel_tol, max_intervals);
}

}  // namespace scatdeg

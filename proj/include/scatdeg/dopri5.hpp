#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "scatdeg/error.hpp"
#include "scatdeg/types.hpp"

namespace scatdeg {

// Continuous extension of one Dormand-Prince step (Hairer's 4th-order dense
// output). Valid for tau in [tau0, tau0 + h].
template <typename Scalar>
struct DenseStep {
  Scalar tau0 = 0;
  Scalar h = 0;
  std::array<StateVec<Scalar>, 5> rcont;

  StateVec<Scalar> operator()(Scalar tau) const {
    const Scalar s = (tau - tau0) / h;
    const Scalar s1 = Scalar(1) - s;
    return rcont[0] + s * (rcont[1] + s1 * (rcont[2] + s * (rcont[3] + s1 * rcont[4])));
  }
  StateVec<Scalar> start() const { return rcont[0]; }
  StateVec<Scalar> end() const { return rcont[0] + rcont[1]; }
};

template <typename Scalar>
struct Dopri5Options {
  Scalar rtol = Scalar(1e-11);
  Scalar atol = Scalar(1e-12);
  Scalar safety = Scalar(0.9);
  Scalar fac_min = Scalar(0.2);
  Scalar fac_max = Scalar(5.0);
  Scalar h_max = std::numeric_limits<Scalar>::infinity();
};

// Adaptive embedded Runge-Kutta 5(4) with FSAL and dense output.
// `System` is callable as f(tau, y, dy).
template <typename Scalar, typename System>
class Dopri5 {
 public:
  using Vector = StateVec<Scalar>;

  Dopri5(System system, Dopri5Options<Scalar> options)
      : f_(std::move(system)), opt_(options) {}

  void reset(Scalar tau, const Vector& y, Scalar h_init = 0) {
    tau_ = tau;
    y_ = y;
    k1_.resize(y.size());
    f_(tau_, y_, k1_);
    h_ = h_init > 0 ? h_init : initial_step();
  }

  Scalar tau() const { return tau_; }
  const Vector& state() const { return y_; }
  Scalar step_size() const { return h_; }

  // Take one accepted step of length at most h_limit; returns its dense output.
  const DenseStep<Scalar>& step(Scalar h_limit = std::numeric_limits<Scalar>::infinity()) {
    constexpr Scalar c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr Scalar a21 = 1.0 / 5;
    constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr Scalar a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr Scalar d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    const auto n = y_.size();
    Vector k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), ys(n);
    bool rejected = false;
    for (;;) {
      Scalar h = std::min({h_, h_limit, opt_.h_max});
      const Scalar floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                           std::max(Scalar(1), std::abs(tau_));
      if (!(h > floor)) {
        if (h_limit <= floor && h_limit >= 0) h = h_limit;  // caller asked for a tiny remainder
        else fail(ErrorKind::StepSizeUnderflow, "Dormand-Prince step size underflow");
      }
      ys = y_ + h * a21 * k1_;
      f_(tau_ + c2 * h, ys, k2);
      ys = y_ + h * (a31 * k1_ + a32 * k2);
      f_(tau_ + c3 * h, ys, k3);
      ys = y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3);
      f_(tau_ + c4 * h, ys, k4);
      ys = y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4);
      f_(tau_ + c5 * h, ys, k5);
      ys = y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      f_(tau_ + h, ys, k6);
      y1 = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      f_(tau_ + h, y1, k7);

      Scalar err2 = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar sc = opt_.atol + opt_.rtol * std::max(std::abs(y_(i)), std::abs(y1(i)));
        const Scalar ei =
            h * (e1 * k1_(i) + e3 * k3(i) + e4 * k4(i) + e5 * k5(i) + e6 * k6(i) + e7 * k7(i)) / sc;
        err2 += ei * ei;
      }
      const Scalar err = std::sqrt(err2 / static_cast<Scalar>(n));
      if (!std::isfinite(err)) {
        h_ = h * opt_.fac_min;
        rejected = true;
        continue;
      }
      Scalar fac = err > 0 ? opt_.safety * std::pow(err, Scalar(-0.2)) : opt_.fac_max;
      fac = std::clamp(fac, opt_.fac_min, opt_.fac_max);
      if (err <= Scalar(1)) {
        dense_.tau0 = tau_;
        dense_.h = h;
        dense_.rcont[0] = y_;
        dense_.rcont[1] = y1 - y_;
        dense_.rcont[2] = h * k1_ - dense_.rcont[1];
        dense_.rcont[3] = dense_.rcont[1] - h * k7 - dense_.rcont[2];
        dense_.rcont[4] = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        tau_ += h;
        y_ = y1;
        k1_ = k7;
        Scalar h_next = h * fac;
        if (rejected) h_next = std::min(h_next, h);  // no growth right after a rejection
        // a step clipped by h_limit keeps the controller's previous proposal
        h_ = h < h_ ? std::max(h_, h_next) : h_next;
        return dense_;
      }
      h_ = h * std::max(fac, opt_.fac_min);
      rejected = true;
    }
  }

 private:
  Scalar initial_step() {
    const auto n = y_.size();
    Scalar d0 = 0, d1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar sc = opt_.atol + opt_.rtol * std::abs(y_(i));
      d0 += (y_(i) / sc) * (y_(i) / sc);
      d1 += (k1_(i) / sc) * (k1_(i) / sc);
    }
    d0 = std::sqrt(d0 / n);
    d1 = std::sqrt(d1 / n);
    Scalar h0 = (d0 < 1e-5 || d1 < 1e-5) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    return std::min(h0, opt_.h_max);
  }

  System f_;
  Dopri5Options<Scalar> opt_;
  Scalar tau_ = 0;
  Scalar h_ = 0;
  Vector y_, k1_;
  DenseStep<Scalar> dense_;
};

}  // namespace scatdeg

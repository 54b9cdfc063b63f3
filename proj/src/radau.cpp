#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ybion/error.hpp"
#include "ybion/ode.hpp"

namespace ybion::ode {

namespace {

// Butcher matrix of the 3-stage Radau IIA method; the last row equals the
// weights, so the step result is the last stage value.
Eigen::Matrix3d radau_matrix() {
  const double s6 = std::sqrt(6.0);
  Eigen::Matrix3d a;
  a << (88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0,
      (296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0,
      (16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0;
  return a;
}

class RadauStepper {
 public:
  explicit RadauStepper(const Eigen::MatrixXd& a) : a_(a), n_(a.rows()), butcher_(radau_matrix()) {}

  Eigen::VectorXd step(const Eigen::VectorXd& y, double h) {
    if (h != cached_h_) factor(h);
    Eigen::VectorXd rhs(3 * n_);
    for (Eigen::Index s = 0; s < 3; ++s) rhs.segment(s * n_, n_) = y;
    Eigen::VectorXd stages = lu_.solve(rhs);
    // One step of iterative refinement: for stiff steps I - h (A x M) is
    // ill-conditioned and the plain solve drifts off the probability simplex.
    stages += lu_.solve(rhs - big_ * stages);
    return stages.segment(2 * n_, n_);
  }

 private:
  void factor(double h) {
    big_ = Eigen::MatrixXd::Identity(3 * n_, 3 * n_);
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index j = 0; j < 3; ++j) big_.block(i * n_, j * n_, n_, n_) -= h * butcher_(i, j) * a_;
    lu_.compute(big_);
    cached_h_ = h;
  }

  const Eigen::MatrixXd& a_;
  Eigen::Index n_;
  Eigen::Matrix3d butcher_;
  Eigen::MatrixXd big_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double cached_h_ = -1.0;
};

}  // namespace

Eigen::VectorXd integrate_linear(const Eigen::MatrixXd& a, Eigen::VectorXd y, double t_end,
                                 double rtol, double atol, std::size_t max_steps,
                                 StepStats* stats) {
  if (t_end <= 0.0) return y;
  const double norm = a.cwiseAbs().maxCoeff();
  if (norm == 0.0) return y;

  RadauStepper full(a);
  RadauStepper half(a);
  double t = 0.0;
  double h = std::min(t_end, 1e-2 / norm);
  StepStats local;
  constexpr double kOrderFactor = 31.0;  // 2^5 - 1

  while (t < t_end) {
    if (local.accepted + local.rejected >= max_steps)
      throw SolverError("integrator exceeded " + std::to_string(max_steps) + " steps");
    if (t_end - t <= 1e-15 * t_end) break;
    h = std::min(h, t_end - t);
    if (h < 1e-20 * t_end) throw SolverError("integrator step size underflow");

    const Eigen::VectorXd coarse = full.step(y, h);
    const Eigen::VectorXd fine = half.step(half.step(y, 0.5 * h), 0.5 * h);
    const double err = (fine - coarse).cwiseAbs().maxCoeff() / kOrderFactor;
    const double scale = atol + rtol * std::max(y.cwiseAbs().maxCoeff(), fine.cwiseAbs().maxCoeff());
    const double ratio = err / scale;

    if (ratio <= 1.0) {
      t += h;
      y = fine;
      ++local.accepted;
    } else {
      ++local.rejected;
    }
    if (!std::isfinite(ratio))
      h *= 0.2;
    else
      h *= ratio == 0.0 ? 4.0 : std::clamp(0.9 * std::pow(ratio, -1.0 / 6.0), 0.2, 4.0);
  }
  if (stats) *stats = local;
  return y;
}

}  // namespace ybion::ode

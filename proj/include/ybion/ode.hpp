#pragma once

#include <Eigen/Dense>

namespace ybion::ode {

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

// Adaptive 3-stage Radau IIA (order 5, L-stable) for the linear autonomous
// system y' = A y. Error control by step doubling. Throws SolverError when the
// tolerance cannot be met within max_steps or the step size underflows.
Eigen::VectorXd integrate_linear(const Eigen::MatrixXd& a, Eigen::VectorXd y, double t_end,
                                 double rtol, double atol, std::size_t max_steps,
                                 StepStats* stats = nullptr);

}  // namespace ybion::ode

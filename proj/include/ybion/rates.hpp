#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ybion/scheme.hpp"

namespace ybion {

// What to do with the part of a level's decay that the branching table does
// not account for (1 - sum of ratios).
enum class ResidualPolicy {
  renormalize,      // scale the listed channels up proportionally
  route_to_ground,  // send the residual to the ground state
};

struct RateOptions {
  ResidualPolicy residual = ResidualPolicy::renormalize;
  bool include_ionization = false;
  double ionization_rate = 0.0;  // s^-1 per unit population of ionizing_level
  std::string ionizing_level = "7p12";
};

inline constexpr const char* kSinkLabel = "ionized";

// Linear rate-equation generator: entry (i, j) is the rate j -> i in s^-1,
// the diagonal holds minus the column sum. With a sink, the last index is the
// absorbing "ionized" state.
struct RateMatrix {
  Eigen::MatrixXd entries;
  std::vector<std::string> labels;
  bool has_sink = false;

  std::size_t dimension() const { return labels.size(); }
  std::size_t index(std::string_view label) const;
  double max_magnitude() const { return entries.cwiseAbs().maxCoeff(); }
  std::string to_csv() const;
};

struct PopulationVector {
  Eigen::VectorXd populations;
  std::vector<std::string> labels;
  std::optional<double> time_s;

  double operator[](std::string_view label) const;
};

// s^-1; total spontaneous decay rate of a level, 1/lifetime.
double decay_rate(const Level& level);

// Saturation intensity pi h c / (3 lambda^3 tau) of a closed two-level
// transition, W/m^2.
double saturation_intensity(double wavelength_nm, double upper_lifetime_s);

// Saturation parameter of a drive: given directly, or peak intensity
// 2P/(pi w0^2) over the saturation intensity.
double saturation_parameter(const LaserDrive& drive, double upper_lifetime_s);

// Symmetric stimulated rate (absorption = stimulated emission) of a drive,
// W = (A/2) S / (1 + (2 delta / Gamma)^2) with A = 1/tau and Gamma = A / 2pi
// the natural FWHM in Hz, so that delta in Hz and Gamma share units.
double stimulated_rate(const LaserDrive& drive, double upper_lifetime_s);

// Spontaneous rate upper -> lower in s^-1 after applying the residual policy.
double spontaneous_rate(const LevelScheme& scheme, std::string_view upper, std::string_view lower,
                        ResidualPolicy policy = ResidualPolicy::renormalize);

RateMatrix build_rate_matrix(const LevelScheme& scheme, const RateOptions& options = {});

// Quasi-steady state: solves M p = 0, sum p = 1. Throws SolverError when the
// null space is not one-dimensional or a sink is active.
PopulationVector steady_state(const RateMatrix& m);

struct EvolveOptions {
  double rtol = 1e-9;
  double atol = 1e-13;
  std::size_t max_steps = 200000;
};

// Integrates dp/dt = M p from p0 over t seconds.
PopulationVector evolve(const RateMatrix& m, const PopulationVector& p0, double t,
                        const EvolveOptions& options = {});

double excitation_probability(const PopulationVector& p, std::string_view label);

// All population in one level.
PopulationVector pure_state(const RateMatrix& m, std::string_view label);

}  // namespace ybion

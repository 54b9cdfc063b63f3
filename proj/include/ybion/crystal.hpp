#pragma once

#include <string>

#include "ybion/constants.hpp"

namespace ybion {

// Weak trap axis seen by the bright (singly charged) ion, plus the ratio
// eta = nu2 / nu1 of single-ion secular frequencies.
struct TrapAxis {
  double nu1_hz = 0.0;
  double ion_mass_kg = yb174_mass_u * PhysicalConstants::atomic_mass_unit;
  double eta = 1.0;

  void check() const;
  double omega1() const { return two_pi * nu1_hz; }
};

struct ChargePair {
  double q1 = 1.0;  // units of e; the bright ion
  double q2 = 1.0;

  void check() const;
};

struct EquilibriumPositions {
  double x1_m = 0.0;  // bright ion, > 0
  double x2_m = 0.0;  // dark ion, < 0
};

struct ModeFrequencies {
  double nu_com_hz = 0.0;
  double nu_bre_hz = 0.0;
};

struct CrystalState {
  EquilibriumPositions positions;
  ModeFrequencies modes;
};

enum class Mode { com, bre };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

EquilibriumPositions equilibrium_positions(const TrapAxis& trap, const ChargePair& charges);

// X1(eta, q2) / X1(eta = 1, q2 = 1) = [4 q2 / (1 + eta^-2)^2]^(1/3).
double displacement_ratio(double eta, double q2);

// Squared mode frequencies in units of nu1^2:
// u+- = (eta^4 + 6 eta^2 + 1 +- sqrt(eta^8 + 14 eta^4 + 1)) / (2 eta^2 + 2).
double mode_eigenvalue(double eta, Mode mode);

ModeFrequencies normal_mode_frequencies(const TrapAxis& trap);

CrystalState crystal_state(const TrapAxis& trap, const ChargePair& charges);

inline constexpr double kEtaMin = 1.0;
inline constexpr double kEtaMax = 10.0;

// Inverts one mode frequency for eta on [1, 10]; absolute accuracy 1e-6 or better.
double infer_eta(double nu_measured_hz, double nu1_hz, Mode mode);

// q2 = ratio^3 (1 + eta^-2)^2 / 4.
double infer_charge(double displacement_ratio, double eta);

}  // namespace ybion

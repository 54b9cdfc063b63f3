#include "ybion/crystal.hpp"

#include <cmath>

#include "ybion/error.hpp"
#include "ybion/format.hpp"

namespace ybion {

void TrapAxis::check() const {
  if (!(nu1_hz > 0.0)) throw DomainError("nu1 must be > 0");
  if (!(ion_mass_kg > 0.0)) throw DomainError("ion mass must be > 0");
  if (!(eta > 0.0)) throw DomainError("eta must be > 0");
}

void ChargePair::check() const {
  if (!(q1 > 0.0) || !(q2 > 0.0)) throw DomainError("charges must be > 0");
}

std::string to_string(Mode mode) { return mode == Mode::com ? "com" : "bre"; }

Mode parse_mode(const std::string& name) {
  if (name == "com") return Mode::com;
  if (name == "bre" || name == "breathe") return Mode::bre;
  throw DomainError("unknown mode '" + name + "' (expected com or bre)");
}

EquilibriumPositions equilibrium_positions(const TrapAxis& trap, const ChargePair& charges) {
  trap.check();
  charges.check();
  const double e = PhysicalConstants::elementary_charge;
  const double coulomb =
      charges.q1 * charges.q2 * e * e / (4.0 * std::numbers::pi * PhysicalConstants::vacuum_permittivity);
  const double inv_eta2 = 1.0 / (trap.eta * trap.eta);
  const double w = trap.omega1();
  const double x1 = std::cbrt(coulomb / ((1.0 + inv_eta2) * (1.0 + inv_eta2) * trap.ion_mass_kg * w * w));
  return {x1, -inv_eta2 * x1};
}

double displacement_ratio(double eta, double q2) {
  if (!(eta > 0.0) || !(q2 > 0.0)) throw DomainError("eta and q2 must be > 0");
  const double s = 1.0 + 1.0 / (eta * eta);
  return std::cbrt(4.0 * q2 / (s * s));
}

double mode_eigenvalue(double eta, Mode mode) {
  if (!(eta > 0.0)) throw DomainError("eta must be > 0");
  const double e2 = eta * eta;
  const double e4 = e2 * e2;
  const double upper = (e4 + 6.0 * e2 + 1.0 + std::sqrt(e4 * e4 + 14.0 * e4 + 1.0)) / (2.0 * e2 + 2.0);
  if (mode == Mode::bre) return upper;
  // u+ u- = 3 eta^2 (determinant of the reduced stiffness matrix); avoids the
  // cancellation in the minus branch at large eta.
  return 3.0 * e2 / upper;
}

ModeFrequencies normal_mode_frequencies(const TrapAxis& trap) {
  trap.check();
  return {trap.nu1_hz * std::sqrt(mode_eigenvalue(trap.eta, Mode::com)),
          trap.nu1_hz * std::sqrt(mode_eigenvalue(trap.eta, Mode::bre))};
}

CrystalState crystal_state(const TrapAxis& trap, const ChargePair& charges) {
  return {equilibrium_positions(trap, charges), normal_mode_frequencies(trap)};
}

double infer_eta(double nu_measured_hz, double nu1_hz, Mode mode) {
  if (!(nu_measured_hz > 0.0) || !(nu1_hz > 0.0)) throw DomainError("frequencies must be > 0");
  const double target = (nu_measured_hz / nu1_hz) * (nu_measured_hz / nu1_hz);
  const double lo_u = mode_eigenvalue(kEtaMin, mode);
  const double hi_u = mode_eigenvalue(kEtaMax, mode);
  constexpr double slack = 1e-12;
  if (target < lo_u * (1.0 - slack) || target > hi_u * (1.0 + slack))
    throw DomainError(to_string(mode) + " frequency " + format_number(nu_measured_hz) +
                      " Hz outside the attainable range [" + format_number(nu1_hz * std::sqrt(lo_u)) +
                      ", " + format_number(nu1_hz * std::sqrt(hi_u)) + "] Hz for eta in [1, 10]");
  if (target <= lo_u) return kEtaMin;
  if (target >= hi_u) return kEtaMax;
  // Both branches are strictly increasing in eta on [1, 10].
  double lo = kEtaMin, hi = kEtaMax;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (mode_eigenvalue(mid, mode) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double infer_charge(double ratio, double eta) {
  if (!(ratio > 0.0) || !(eta > 0.0)) throw DomainError("displacement ratio and eta must be > 0");
  const double s = 1.0 + 1.0 / (eta * eta);
  return ratio * ratio * ratio * s * s / 4.0;
}

}  // namespace ybion

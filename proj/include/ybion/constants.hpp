#pragma once

#include <numbers>

namespace ybion {

// CODATA 2018 values, SI unless the name says otherwise.
struct PhysicalConstants {
  static constexpr double elementary_charge = 1.602176634e-19;     // C
  static constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
  static constexpr double planck_constant = 6.62607015e-34;        // J s
  static constexpr double speed_of_light = 299792458.0;            // m/s
  static constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg
  static constexpr double electron_mass_u = 5.48579909065e-4;      // u
  static constexpr double fine_structure = 7.2973525693e-3;
  static constexpr double bohr_radius = 5.29177210903e-11;         // m
  static constexpr double rydberg_infinity_cm1 = 109737.31568160;  // cm^-1

  static constexpr double hc = planck_constant * speed_of_light;   // J m

  // Rydberg constant for a finite nuclear (atomic) mass given in u.
  static constexpr double rydberg_cm1(double mass_u) {
    return rydberg_infinity_cm1 / (1.0 + electron_mass_u / mass_u);
  }
};

namespace units {

inline constexpr double megabarn = 1e-22;  // m^2
inline constexpr double nm = 1e-9;
inline constexpr double electron_volt = PhysicalConstants::elementary_charge;  // J
inline constexpr double day = 86400.0;  // s

// Photon energy in joules for a vacuum wavelength in nm.
constexpr double photon_energy_j(double wavelength_nm) {
  return PhysicalConstants::hc / (wavelength_nm * nm);
}

// 1 cm^-1 expressed in joules (hc * 100 m^-1).
inline constexpr double wavenumber_cm1_j = PhysicalConstants::hc * 100.0;

constexpr double wavenumber_to_ev(double cm1) { return cm1 * wavenumber_cm1_j / electron_volt; }
constexpr double ev_to_wavenumber(double ev) { return ev * electron_volt / wavenumber_cm1_j; }

}  // namespace units

// Mass of 174Yb in u (AME2016 atomic mass).
inline constexpr double yb174_mass_u = 173.9388664;
inline constexpr double yb174_rydberg_cm1 = PhysicalConstants::rydberg_cm1(yb174_mass_u);

inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace ybion

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ybion/rates.hpp"
#include "ybion/scheme.hpp"

namespace ybion {

// Line center of the 5d3/2 -> 7p1/2 transition, nm. Metadata only: the scan
// axis is detuning relative to this value.
inline constexpr double kLineCenter245nm = 245.426;

struct DriveKey {
  std::string lower;
  std::string upper;
};

struct ScanCurve {
  std::vector<double> detunings_hz;  // strictly increasing
  std::vector<double> fluorescence;  // >= 0
  std::optional<std::vector<double>> noise_sigma;

  void check() const;
  std::size_t size() const { return detunings_hz.size(); }
};

struct ScanOptions {
  std::string fluorescence_upper = "6p12";
  std::string fluorescence_lower = "6s12";
  ResidualPolicy residual = ResidualPolicy::renormalize;
  double noise_sigma = 0.0;     // absolute, signal units
  double noise_relative = 0.0;  // fraction of the noiseless peak, added to noise_sigma
  std::uint64_t seed = 0;
};

// Steady-state fluorescence p(upper) A(upper -> lower) as the scanned drive is
// detuned over the grid.
ScanCurve simulate_scan(const LevelScheme& scheme, const DriveKey& scan_drive,
                        std::span<const double> detuning_grid, const ScanOptions& options = {});

// Effective saturation of the scanned drive judged from the model's signal
// levels: on resonance, (f(W) - f(0)) / (f(inf) - f(W)). The signal is a
// Moebius function of the stimulated rate W, so the resonance is an exact
// Lorentzian of FWHM Gamma sqrt(1 + S_eff).
double effective_saturation(const LevelScheme& scheme, const DriveKey& scan_drive,
                            const ScanOptions& options = {});

// Copy of the scheme with the scanned drive rescaled (as a saturation
// parameter) so that its effective saturation equals `target`.
LevelScheme with_effective_saturation(const LevelScheme& scheme, const DriveKey& scan_drive,
                                      double target, const ScanOptions& options = {});

double lorentzian(double x, double center, double fwhm, double amplitude, double offset);

struct LorentzianFit {
  double center = 0.0;
  double fwhm = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // order: center, fwhm, amplitude, offset
  bool converged = false;
  int iterations = 0;
  double max_abs_residual = 0.0;
  std::string diagnostics;
};

// Levenberg-Marquardt fit of offset + amplitude / (1 + (2 (x - center) / fwhm)^2).
// Starting point: center at the highest sample, offset from the median of the
// outer 10% of points on each side, amplitude = peak - offset, fwhm from the
// interpolated half-maximum crossings.
LorentzianFit fit_lorentzian(const ScanCurve& curve);

// tau = 1 / (2 pi Gamma_nat) with Gamma_nat = fwhm / sqrt(1 + saturation).
double lifetime_from_linewidth(double fwhm_hz, double saturation);

std::vector<double> linear_grid(double start, double stop, std::size_t points);

ScanCurve read_scan(std::istream& in);
void write_scan(std::ostream& out, const ScanCurve& curve);

}  // namespace ybion

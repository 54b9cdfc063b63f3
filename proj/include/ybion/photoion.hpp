#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ybion {

struct GaussianBeam {
  double power_w = 0.0;
  double waist_m = 0.0;  // 1/e^2 intensity radius
  double wavelength_nm = 0.0;

  GaussianBeam(double power, double waist, double wavelength);
  double peak_intensity() const;  // 2P / (pi w0^2), W/m^2
};

enum class CrossSectionModel { hydrogenic, burgess, peach, user };

std::string to_string(CrossSectionModel model);
CrossSectionModel parse_cross_section_model(const std::string& name);

class CrossSection {
 public:
  CrossSection(double value_m2, CrossSectionModel model);
  static CrossSection from_megabarn(double mb, CrossSectionModel model = CrossSectionModel::user);

  double m2() const { return value_m2_; }
  double megabarn() const;
  CrossSectionModel model() const { return model_; }

 private:
  double value_m2_;
  CrossSectionModel model_;
};

// Peak on-axis photon flux of a Gaussian beam, photons m^-2 s^-1.
double photon_flux(const GaussianBeam& beam);

// R = p * sigma * F.
double ionization_rate(double p_upper, const CrossSection& sigma, double flux);

// Coefficient c (m^2/J) with R = c * P / w0^2, c = p sigma 2 / (pi E_photon).
double rate_coefficient(double p_upper, const CrossSection& sigma, double wavelength_nm);

// --- quantum-defect machinery ----------------------------------------------
//
// Energies of a Rydberg series converging on `limit` follow
//   E_n = limit - Z^2 R / (n - mu)^2
// with Z the charge of the residual core (1 for neutrals, 2 for Yb+). The
// effective quantum number is n* = Z sqrt(R / (limit - E)).

struct RydbergMember {
  int n = 0;
  double energy_cm1 = 0.0;
};

struct RydbergSeries {
  std::vector<RydbergMember> members;
  double ionization_limit_cm1 = 0.0;
  int ell = 0;
  double core_charge = 1.0;
  double rydberg_cm1 = 0.0;  // 0 selects the 174Yb mass-corrected value

  void check() const;
  double rydberg() const;
};

RydbergSeries load_series(const std::filesystem::path& path);

double effective_quantum_number(double energy_cm1, double limit_cm1, double core_charge = 1.0,
                                double rydberg_cm1 = 0.0);

struct QuantumDefectFit {
  double mu = 0.0;
  double max_residual_cm1 = 0.0;
  int iterations = 0;
};

QuantumDefectFit fit_quantum_defect(const RydbergSeries& series);

// Coefficients of one model, loaded from a tabular data file. Each channel
// row gives the reduced amplitude G(nu, eps) = (g0 + g1/nu + g2/nu^2)
// (1 + nu^2 eps)^gamma and phase chi(eps) = chi0 + chi1 eps for the
// transition l -> l', together with the quantum defect mu' of the final
// channel. See data/qdt/README.md for the file layout.
struct QdtChannel {
  int ell_initial = 0;
  int ell_final = 0;
  double g0 = 0.0, g1 = 0.0, g2 = 0.0;
  double gamma = 0.0;
  double chi0 = 0.0, chi1 = 0.0;
  double mu_final = 0.0;
};

struct QdtTable {
  CrossSectionModel model = CrossSectionModel::user;
  std::map<std::string, std::string> provenance;  // header "# key: value" lines
  std::vector<QdtChannel> channels;
};

QdtTable load_qdt_table(const std::filesystem::path& path);

struct PhotoionizationTarget {
  double n_star = 0.0;
  int ell_initial = 0;
  double core_charge = 1.0;
  double rydberg_cm1 = 0.0;  // 0 selects the 174Yb value
};

// Threshold photon energy Z^2 R / n*^2 in eV.
double threshold_energy_ev(const PhotoionizationTarget& target);

// Kramers hydrogenic cross section with the prefactor 64 pi alpha a0^2 / (3 sqrt 3).
CrossSection cross_section_hydrogenic(const PhotoionizationTarget& target, double photon_energy_ev);

// General quantum-defect formula driven by a coefficient table.
CrossSection cross_section_qdt(const PhotoionizationTarget& target, double photon_energy_ev,
                               const QdtTable& table);

// Dispatches on model; the parametrized models look up `<dir>/<model>.tab`
// and throw DomainError when the table is missing.
CrossSection cross_section(const PhotoionizationTarget& target, double photon_energy_ev,
                           CrossSectionModel model,
                           const std::optional<std::filesystem::path>& table_dir = std::nullopt);

}  // namespace ybion

#include "ybion/photoion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ybion/constants.hpp"
#include "ybion/error.hpp"
#include "ybion/format.hpp"

namespace ybion {

GaussianBeam::GaussianBeam(double power, double waist, double wavelength)
    : power_w(power), waist_m(waist), wavelength_nm(wavelength) {
  if (!(power >= 0.0)) throw DomainError("beam power must be >= 0");
  if (!(waist > 0.0)) throw DomainError("beam waist must be > 0");
  if (!(wavelength > 0.0)) throw DomainError("beam wavelength must be > 0");
}

double GaussianBeam::peak_intensity() const {
  return 2.0 * power_w / (std::numbers::pi * waist_m * waist_m);
}

std::string to_string(CrossSectionModel model) {
  switch (model) {
    case CrossSectionModel::hydrogenic: return "hydrogenic";
    case CrossSectionModel::burgess: return "burgess";
    case CrossSectionModel::peach: return "peach";
    case CrossSectionModel::user: return "user";
  }
  return "user";
}

CrossSectionModel parse_cross_section_model(const std::string& name) {
  if (name == "hydrogenic") return CrossSectionModel::hydrogenic;
  if (name == "burgess") return CrossSectionModel::burgess;
  if (name == "peach") return CrossSectionModel::peach;
  if (name == "user") return CrossSectionModel::user;
  throw DomainError("unknown cross-section model '" + name + "'");
}

CrossSection::CrossSection(double value_m2, CrossSectionModel model)
    : value_m2_(value_m2), model_(model) {
  if (!(value_m2 >= 0.0)) throw DomainError("cross section must be >= 0");
}

CrossSection CrossSection::from_megabarn(double mb, CrossSectionModel model) {
  return CrossSection(mb * units::megabarn, model);
}

double CrossSection::megabarn() const { return value_m2_ / units::megabarn; }

double photon_flux(const GaussianBeam& beam) {
  return beam.peak_intensity() / units::photon_energy_j(beam.wavelength_nm);
}

double ionization_rate(double p_upper, const CrossSection& sigma, double flux) {
  if (!(p_upper >= 0.0 && p_upper <= 1.0)) throw DomainError("excitation probability must lie in [0, 1]");
  return p_upper * sigma.m2() * flux;
}

double rate_coefficient(double p_upper, const CrossSection& sigma, double wavelength_nm) {
  if (!(p_upper >= 0.0 && p_upper <= 1.0)) throw DomainError("excitation probability must lie in [0, 1]");
  if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be > 0");
  return p_upper * sigma.m2() * 2.0 / (std::numbers::pi * units::photon_energy_j(wavelength_nm));
}

// --- quantum defects -------------------------------------------------------

double RydbergSeries::rydberg() const { return rydberg_cm1 > 0.0 ? rydberg_cm1 : yb174_rydberg_cm1; }

void RydbergSeries::check() const {
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!(members[i].energy_cm1 < ionization_limit_cm1))
      throw DomainError("series member n=" + std::to_string(members[i].n) +
                        " lies at or above the ionization limit");
    if (i > 0 && members[i].n <= members[i - 1].n)
      throw DomainError("series principal quantum numbers must be strictly increasing");
  }
  if (!(core_charge > 0.0)) throw DomainError("core charge must be > 0");
}

RydbergSeries load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open series file " + path.string());
  RydbergSeries series;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::string key;
    if (!(row >> key)) continue;
    double value = 0.0;
    if (key == "limit_cm1" || key == "ell" || key == "core_charge" || key == "rydberg_cm1") {
      if (!(row >> value)) throw ParseError(lineno, "missing value for " + key);
      if (key == "limit_cm1") series.ionization_limit_cm1 = value;
      if (key == "ell") series.ell = static_cast<int>(value);
      if (key == "core_charge") series.core_charge = value;
      if (key == "rydberg_cm1") series.rydberg_cm1 = value;
      continue;
    }
    RydbergMember m;
    try {
      m.n = std::stoi(key);
    } catch (const std::exception&) {
      throw ParseError(lineno, "expected principal quantum number, got '" + key + "'");
    }
    if (!(row >> m.energy_cm1)) throw ParseError(lineno, "missing member energy");
    series.members.push_back(m);
  }
  return series;
}

double effective_quantum_number(double energy_cm1, double limit_cm1, double core_charge,
                                double rydberg_cm1) {
  if (!(energy_cm1 < limit_cm1)) throw DomainError("level energy must lie below the ionization limit");
  const double r = rydberg_cm1 > 0.0 ? rydberg_cm1 : yb174_rydberg_cm1;
  return core_charge * std::sqrt(r / (limit_cm1 - energy_cm1));
}

QuantumDefectFit fit_quantum_defect(const RydbergSeries& series) {
  if (series.members.size() < 2) throw DomainError("need >= 2 members to fit a quantum defect");
  series.check();
  const double zr = series.core_charge * series.core_charge * series.rydberg();
  const double limit = series.ionization_limit_cm1;
  const int n_min = series.members.front().n;

  // Start from the mean of the single-member defects.
  double mu = 0.0;
  for (const auto& m : series.members)
    mu += m.n - effective_quantum_number(m.energy_cm1, limit, series.core_charge, series.rydberg());
  mu /= static_cast<double>(series.members.size());
  mu = std::clamp(mu, 0.0, n_min - 1e-6);

  QuantumDefectFit fit;
  for (int it = 1; it <= 200; ++it) {
    double num = 0.0, den = 0.0;
    for (const auto& m : series.members) {
      const double d = m.n - mu;
      const double r = limit - zr / (d * d) - m.energy_cm1;
      const double j = -2.0 * zr / (d * d * d);
      num += r * j;
      den += j * j;
    }
    double step = -num / den;
    // Stay inside the bracket (mu < n_min keeps every n - mu positive).
    while (mu + step >= n_min) step *= 0.5;
    mu += step;
    fit.iterations = it;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(mu))) break;
    if (it == 200) throw SolverError("quantum-defect fit did not converge");
  }
  if (!(mu >= -1e-12 && mu < n_min))
    throw DomainError("fitted quantum defect " + format_number(mu) + " outside [0, n_min)");
  fit.mu = std::max(mu, 0.0);
  for (const auto& m : series.members) {
    const double d = m.n - fit.mu;
    fit.max_residual_cm1 = std::max(fit.max_residual_cm1, std::abs(limit - zr / (d * d) - m.energy_cm1));
  }
  return fit;
}

// --- cross sections --------------------------------------------------------

QdtTable load_qdt_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("missing coefficient table " + path.string());
  QdtTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("#", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        auto trim = [](std::string s) {
          const auto b = s.find_first_not_of(" \t#");
          const auto e = s.find_last_not_of(" \t\r");
          return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        table.provenance[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
      }
      continue;
    }
    std::istringstream row(line);
    QdtChannel c;
    if (!(row >> c.ell_initial)) continue;
    if (!(row >> c.ell_final >> c.g0 >> c.g1 >> c.g2 >> c.gamma >> c.chi0 >> c.chi1 >> c.mu_final))
      throw ParseError(lineno, "coefficient row needs 9 columns");
    if (std::abs(c.ell_final - c.ell_initial) != 1)
      throw ParseError(lineno, "dipole channel must change l by one");
    table.channels.push_back(c);
  }
  if (auto it = table.provenance.find("model"); it != table.provenance.end())
    table.model = parse_cross_section_model(it->second);
  if (table.channels.empty()) throw DomainError("coefficient table " + path.string() + " has no rows");
  return table;
}

double threshold_energy_ev(const PhotoionizationTarget& target) {
  if (!(target.n_star > 0.0)) throw DomainError("effective quantum number must be > 0");
  const double r = target.rydberg_cm1 > 0.0 ? target.rydberg_cm1 : yb174_rydberg_cm1;
  const double z = target.core_charge;
  return units::wavenumber_to_ev(z * z * r / (target.n_star * target.n_star));
}

namespace {

void require_above_threshold(double threshold_ev, double photon_energy_ev) {
  if (!(photon_energy_ev > threshold_ev))
    throw DomainError("photon energy " + format_fixed(photon_energy_ev, 4) +
                      " eV is below the ionization threshold " + format_fixed(threshold_ev, 4) + " eV");
}

}  // namespace

CrossSection cross_section_hydrogenic(const PhotoionizationTarget& target, double photon_energy_ev) {
  const double threshold = threshold_energy_ev(target);
  require_above_threshold(threshold, photon_energy_ev);
  const double a0 = PhysicalConstants::bohr_radius;
  const double kramers = 64.0 * std::numbers::pi * PhysicalConstants::fine_structure * a0 * a0 /
                         (3.0 * std::sqrt(3.0));
  const double ratio = threshold / photon_energy_ev;
  const double z2 = target.core_charge * target.core_charge;
  return CrossSection(kramers * target.n_star / z2 * ratio * ratio * ratio, CrossSectionModel::hydrogenic);
}

CrossSection cross_section_qdt(const PhotoionizationTarget& target, double photon_energy_ev,
                               const QdtTable& table) {
  const double threshold = threshold_energy_ev(target);
  require_above_threshold(threshold, photon_energy_ev);
  const double nu = target.n_star;
  const double z2 = target.core_charge * target.core_charge;
  // photoelectron energy in units of Z^2 Ry; 1 + nu^2 eps = E_photon / E_threshold
  const double eps = (photon_energy_ev - threshold) / (threshold * nu * nu);
  const double envelope = 1.0 + nu * nu * eps;
  const double a0 = PhysicalConstants::bohr_radius;
  const double sigma0 = 4.0 * std::numbers::pi * PhysicalConstants::fine_structure * a0 * a0 / 3.0;

  double sum = 0.0;
  bool matched = false;
  for (const auto& c : table.channels) {
    if (c.ell_initial != target.ell_initial) continue;
    matched = true;
    const double l_greater = std::max(c.ell_initial, c.ell_final);
    const double weight = l_greater / (2.0 * c.ell_initial + 1.0);
    const double g = (c.g0 + c.g1 / nu + c.g2 / (nu * nu)) * std::pow(envelope, c.gamma);
    const double chi = c.chi0 + c.chi1 * eps;
    const double amp = g * std::cos(std::numbers::pi * (nu + c.mu_final + chi));
    sum += weight * amp * amp;
  }
  if (!matched)
    throw DomainError("coefficient table has no channel for initial l=" + std::to_string(target.ell_initial));
  return CrossSection(sigma0 * nu / z2 * sum / (envelope * envelope * envelope), table.model);
}

CrossSection cross_section(const PhotoionizationTarget& target, double photon_energy_ev,
                           CrossSectionModel model,
                           const std::optional<std::filesystem::path>& table_dir) {
  if (model == CrossSectionModel::hydrogenic) return cross_section_hydrogenic(target, photon_energy_ev);
  if (!table_dir)
    throw DomainError("missing coefficient table for model '" + to_string(model) + "'");
  const auto path = *table_dir / (to_string(model) + ".tab");
  if (!std::filesystem::exists(path))
    throw DomainError("missing coefficient table for model '" + to_string(model) + "' (" +
                      path.string() + ")");
  auto table = load_qdt_table(path);
  table.model = model;
  return cross_section_qdt(target, photon_energy_ev, table);
}

}  // namespace ybion

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ybion/constants.hpp"
#include "ybion/crystal.hpp"
#include "ybion/error.hpp"
#include "ybion/mc.hpp"
#include "ybion/photoion.hpp"
#include "ybion/rates.hpp"
#include "ybion/scheme.hpp"
#include "ybion/spectro.hpp"

using namespace ybion;

namespace {

const std::filesystem::path kData = YBION_TEST_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  std::function<void(Outcome&)> body;
};

bool within_rel(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

double photon_ev(double wavelength_nm) {
  return 6.62607015e-34 * 299792458.0 / (wavelength_nm * 1e-9) / 1.602176634e-19;
}

void rate_coefficient_check(Outcome& o) {
  const double c = rate_coefficient(9.5e-3, CrossSection::from_megabarn(5.5), 245.426);
  o.detail << "coefficient " << c << " m^2/J ";
  o.require(within_rel(c, 4.1e-6, 0.02), "4.1e-6 within 2%");
}

void ionization_rate_check(Outcome& o) {
  const double flux = photon_flux(GaussianBeam(1e-4, 1e-5, 245.426));
  const double r = ionization_rate(9.5e-3, CrossSection::from_megabarn(5.5), flux);
  o.detail << "R " << r << " 1/s ";
  o.require(within_rel(r, 4.1, 0.02), "4.1 1/s within 2%");
}

void displacement_ratio_check(Outcome& o) {
  const auto ref = oracle::minimize_potential(474e3, 1.0, 1.0, 1.0, 3e-6, -3e-6);
  const auto brute = oracle::minimize_potential(474e3, 2.0, 1.0, 2.0, 3e-6, -3e-6);
  const double r22 = displacement_ratio(2.0, 2.0), r207 = displacement_ratio(2.07, 2.0);
  o.detail << "ratio(2,2) " << r22 << " oracle " << brute.x1 / ref.x1 << ", ratio(2.07,2) " << r207 << " ";
  o.require(std::abs(r22 - brute.x1 / ref.x1) <= 1e-3, "oracle agreement 1e-3");
  o.require(std::abs(r22 - 1.7235) <= 1e-3, "1.7235");
  o.require(r207 >= 1.70 && r207 <= 1.78, "[1.70, 1.78]");
}

void charge_inference_check(Outcome& o) {
  const double q = infer_charge(1.74, 2.135);
  o.detail << "q2 " << q << " e ";
  o.require(std::abs(q - 1.96) <= 0.01, "1.96 within 0.01");
}

void mode_roundtrip_check(Outcome& o) {
  const auto m1 = normal_mode_frequencies({474e3, oracle::kMass, 1.0});
  o.require(m1.nu_com_hz == 474e3, "com exactly nu1 at eta 1");
  o.require(std::abs(m1.nu_bre_hz - std::sqrt(3.0) * 474e3) <= 1e-15 * m1.nu_bre_hz, "bre sqrt(3) nu1 at eta 1");

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  double worst_eta = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double eta = u(rng);
    const TrapAxis trap{474e3, oracle::kMass, eta};
    const auto f = normal_mode_frequencies(trap);
    worst_eta = std::max({worst_eta, std::abs(infer_eta(f.nu_com_hz, 474e3, Mode::com) - eta),
                          std::abs(infer_eta(f.nu_bre_hz, 474e3, Mode::bre) - eta)});
  }
  double worst_rel = 0.0;
  std::uniform_real_distribution<double> v(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double nu1 = 1e5 + 1e6 * v(rng), eta = 1.0 + 4.0 * v(rng), q2 = 0.5 + 2.5 * v(rng);
    const auto a = normal_mode_frequencies({nu1, oracle::kMass, eta});
    const auto [com, bre] = oracle::hessian_modes(nu1, eta, q2);
    worst_rel = std::max({worst_rel, std::abs(a.nu_com_hz / com - 1.0), std::abs(a.nu_bre_hz / bre - 1.0)});
  }
  o.detail << "max |eta error| " << worst_eta << ", max Hessian rel. diff " << worst_rel << " ";
  o.require(worst_eta <= 1e-6, "eta round trip 1e-6");
  o.require(worst_rel <= 1e-9, "Hessian oracle 1e-9");
}

void steady_state_check(Outcome& o) {
  std::mt19937_64 rng(2024);
  double worst = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto rs = oracle::random_scheme(rng);
    const auto m = build_rate_matrix(rs.scheme);
    const auto ss = steady_state(m);
    const auto ev = evolve(m, pure_state(m, "L0"), 30.0 / rs.min_rate);
    worst = std::max(worst, (ss.populations - ev.populations).cwiseAbs().maxCoeff());
    worst_sum = std::max({worst_sum, std::abs(ev.populations.sum() - 1.0), std::abs(ss.populations.sum() - 1.0)});
  }
  o.detail << "max |steady - evolved| " << worst << ", max |sum - 1| " << worst_sum << " ";
  o.require(worst <= 1e-7, "oracle equivalence 1e-7");
  o.require(worst_sum <= 1e-9, "conservation 1e-9");
}

void p7p_check(Outcome& o) {
  const auto path = kData / "yb174_plus.scheme";
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  o.require(text.find("# provenance-levels: NIST ASD Yb II") != std::string::npos, "provenance-levels header");
  o.require(text.find("# provenance-status:") != std::string::npos, "provenance-status header");

  const auto scheme = load_scheme(text);
  o.require(scheme.drives().size() == 4, "four drives");
  for (const auto& d : scheme.drives()) {
    const double s = saturation_parameter(d, *scheme.level(d.upper).lifetime_s);
    o.require(s >= 10.0, "drive " + d.upper + " strongly saturated");
  }
  const double p = excitation_probability(steady_state(build_rate_matrix(scheme)), "7p12");
  o.detail << "p7p " << p << " (ratio to 9.5e-3: " << p / 9.5e-3 << ") ";
  o.require(p >= 9.5e-3 / 2.0 && p <= 9.5e-3 * 2.0, "factor of 2");
}

void cross_section_check(Outcome& o) {
  const auto series = load_series(kData / "yb_ii_np_series.txt");
  PhotoionizationTarget t;
  t.ell_initial = series.ell;
  t.core_charge = series.core_charge;
  t.n_star = effective_quantum_number(series.members.back().energy_cm1, series.ionization_limit_cm1,
                                      series.core_charge);
  const double e245 = photon_ev(245.426);
  const double at_threshold =
      cross_section(t, threshold_energy_ev(t) * (1.0 + 1e-12), CrossSectionModel::hydrogenic).megabarn();
  const double at_245 = cross_section(t, e245, CrossSectionModel::hydrogenic).megabarn();
  o.detail << "hydrogenic " << at_threshold << " Mb at threshold, " << at_245 << " Mb at 245 nm; ";
  o.require(at_threshold >= 1.0 && at_threshold <= 100.0, "hydrogenic 1-100 Mb at threshold");

  const std::pair<CrossSectionModel, double> targets[] = {{CrossSectionModel::burgess, 5.5},
                                                          {CrossSectionModel::peach, 7.2}};
  for (const auto& [model, expected] : targets) {
    try {
      const double s = cross_section(t, e245, model, kData / "qdt").megabarn();
      o.detail << to_string(model) << " " << s << " Mb; ";
      o.require(within_rel(s, expected, 0.20), to_string(model) + " within 20%");
    } catch (const DomainError& e) {
      o.detail << to_string(model) << ": " << e.what() << "; ";
      o.require(false, to_string(model) + " table");
    }
  }
}

void lifetime_pipeline_check(Outcome& o) {
  const DriveKey key{"5d32", "7p12"};
  const double tau = 13.5e-9, s = 0.02;
  const auto scheme = with_effective_saturation(load_scheme_file(kData / "yb174_plus.scheme").with_lifetime("7p12", tau),
                                                key, s);
  const auto grid = linear_grid(-60e6, 60e6, 241);
  const auto clean = fit_lorentzian(simulate_scan(scheme, key, grid));
  o.require(clean.converged, "noiseless fit converged");
  const double tau_clean = lifetime_from_linewidth(clean.fwhm, s);
  o.require(within_rel(tau_clean, tau, 0.02), "noiseless tau within 2%");

  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ScanOptions opts;
    opts.noise_relative = 0.01;
    opts.seed = seed;
    const auto fit = fit_lorentzian(simulate_scan(scheme, key, grid, opts));
    if (fit.converged && std::abs(lifetime_from_linewidth(fit.fwhm, s) - tau) <= 2.1e-9) ++inside;
  }
  o.detail << "noiseless tau " << tau_clean * 1e9 << " ns, noisy seeds within 2.1 ns: " << inside << "/100 ";
  o.require(inside >= 95, ">= 95 of 100 seeds");
}

void monte_carlo_check(Outcome& o) {
  SequenceConfig c;
  c.ionization_rate = 4.1;
  c.ionization_duty = 0.5;
  c.rng_seed = 1;
  const auto runs = simulate_ionization_times(c, 100000, 0);
  const auto s = summarize_times(runs);
  o.require(s.mean_s.has_value(), "events recorded");
  if (!s.mean_s) return;
  const double expected = 1.0 / (c.ionization_rate * c.ionization_duty);
  std::vector<double> x;
  for (const auto& r : runs)
    if (r.exposure_s) x.push_back(*r.exposure_s * c.ionization_rate);
  const double d = oracle::ks_exponential(x), critical = 1.628 / std::sqrt(static_cast<double>(x.size()));
  o.detail << "mean " << *s.mean_s << " s +- " << *s.std_error_s << " (expected " << expected << "), KS D " << d
           << " vs " << critical << " ";
  o.require(std::abs(*s.mean_s - expected) <= 2.0 * *s.std_error_s, "mean within 2 SE");
  o.require(*s.mean_s < 1.0, "below one second");
  o.require(d < critical, "KS at 1%");
}

void verification_check(Outcome& o) {
  const TrapAxis trap{474e3, yb174_mass_u * PhysicalConstants::atomic_mass_unit, 2.135};
  const auto stats = verification_roundtrip(trap, {1.0, 2.0}, kMeasuredNoise, 1000, 0, 0.14);
  o.detail << "fraction within 0.14 e: " << stats.fraction_within << ", mean q2 " << stats.mean_q2 << ", sd "
           << stats.sd_q2 << " ";
  o.require(stats.fraction_within >= 0.90, ">= 90% of 1000 seeds");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "rate coefficient", rate_coefficient_check},
      {2, "ionization rate", ionization_rate_check},
      {3, "displacement ratio", displacement_ratio_check},
      {4, "charge inference", charge_inference_check},
      {5, "mode round trip", mode_roundtrip_check},
      {6, "steady-state solver", steady_state_check},
      {7, "p7p with bundled data", p7p_check},
      {8, "cross sections", cross_section_check},
      {9, "lifetime pipeline", lifetime_pipeline_check},
      {10, "Monte Carlo timing", monte_carlo_check},
      {11, "verification round trip", verification_check},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %2d %-24s %s(%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.str().c_str(),
                secs);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

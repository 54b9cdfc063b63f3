#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "manifest.hpp"
#include "ybion/constants.hpp"
#include "ybion/crystal.hpp"
#include "ybion/error.hpp"
#include "ybion/format.hpp"
#include "ybion/mc.hpp"
#include "ybion/photoion.hpp"
#include "ybion/random.hpp"
#include "ybion/rates.hpp"
#include "ybion/scheme.hpp"
#include "ybion/spectro.hpp"

namespace ybion::cli {

namespace fs = std::filesystem;

std::vector<fs::path> data_search_path() {
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("YBION_DATA_DIR")) {
    std::stringstream list(env);
    std::string entry;
    while (std::getline(list, entry, ':'))
      if (!entry.empty()) dirs.emplace_back(entry);
  }
  dirs.emplace_back(YBION_DEFAULT_DATA_DIR);
  return dirs;
}

fs::path resolve_data_file(const std::string& name) {
  const fs::path p(name);
  if (fs::exists(p)) return p;
  if (p.is_relative())
    for (const auto& dir : data_search_path())
      if (fs::exists(dir / p)) return dir / p;
  throw DomainError("cannot find data file '" + name + "'");
}

namespace {

// Every value a subcommand can take. One instance per dispatch call, so the
// CLI is re-entrant and tests can call dispatch repeatedly.
struct Params {
  std::string output;

  // steady-state / scan
  std::string scheme = "yb174_plus.scheme";
  std::string residual = "renormalize";
  std::vector<std::string> drive_overrides;
  std::string matrix_csv;

  // ionize-rate
  double p7p = 0.0, sigma_mb = 0.0, power_w = 0.0, waist_m = 0.0;
  double wavelength_nm = kLineCenter245nm;

  // xsec
  std::string model;
  std::string series = "yb_ii_np_series.txt";
  std::optional<double> limit_cm1;
  std::optional<int> n_level;
  std::string table_dir = "qdt";
  std::string table;

  // crystal
  double nu1_hz = 0.0, eta = 1.0, q1 = 1.0, q2 = 1.0, mass_u = yb174_mass_u;
  std::vector<std::string> invert_modes;
  std::optional<double> invert_ratio;

  // scan
  std::string lower = "5d32", upper = "7p12";
  std::string grid = "-60e6:60e6:241";
  std::optional<double> lifetime_ns, saturation, effective_saturation;
  double noise_rel = 0.0, noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // fit-scan
  std::string data;
  double fit_saturation = 0.0;

  // simulate
  double rate = 0.0, duty = 0.5, chop_hz = 50.0, max_time_s = 10.0, failure_prob = 0.0;
  std::size_t trials = 1000;
  unsigned workers = 1;
  bool summary_only = false;

  // verify-roundtrip
  double vr_eta = 2.135, vr_q2 = 2.0, vr_nu1_hz = 474e3;
  std::string noise = "measured";
  std::optional<double> ratio_noise_rel, freq_noise_rel;
  std::size_t seeds = 1000;
  double tolerance = 0.14;

  // replay
  std::string manifest;
};

CLI::Option* add_output(CLI::App* sub, Params& p) {
  return sub->add_option("-o,--output", p.output,
                         "[path] write the table here and a .manifest sidecar next to it");
}

void add_scheme_options(CLI::App* sub, Params& p) {
  sub->add_option("--scheme", p.scheme,
                  "[path] level-scheme file; relative names are also looked up in YBION_DATA_DIR "
                  "and the bundled data directory");
  sub->add_option("--residual", p.residual, "[choice] fate of unlisted branching: renormalize or route-to-ground")
      ->check(CLI::IsMember({"renormalize", "route-to-ground"}));
  sub->add_option("--drive-override,--drive-overrides", p.drive_overrides,
                  "[LOWER:UPPER:key=value,...] edit a drive; keys saturation [1], power_w [W], "
                  "waist_m [m], detuning_hz [Hz], or 'off' to remove it (repeatable)");
}

std::unique_ptr<CLI::App> build_app(Params& p) {
  auto app = std::make_unique<CLI::App>(
      "ybion: rate-equation, photoionization, Coulomb-crystal and Monte Carlo tools for "
      "Yb+ -> Yb2+ ionization",
      "ybion");
  app->option_defaults()->always_capture_default();
  app->require_subcommand(1);
  app->set_version_flag("--version", kToolVersion);

  auto* ss = app->add_subcommand("steady-state", "quasi-steady-state level populations of a driven scheme");
  add_scheme_options(ss, p);
  ss->add_option("--matrix-csv", p.matrix_csv, "[path] also export the rate matrix as CSV");
  add_output(ss, p);

  auto* ir = app->add_subcommand("ionize-rate", "ionization rate R = p sigma F and the coefficient of R = c P / w0^2");
  ir->add_option("--p7p", p.p7p, "[1] excitation probability of the ionizing level")->required();
  ir->add_option("--sigma-mb", p.sigma_mb, "[Mb] photoionization cross section")->required();
  ir->add_option("--power-w", p.power_w, "[W] beam power")->required();
  ir->add_option("--waist-m", p.waist_m, "[m] 1/e^2 intensity radius")->required();
  ir->add_option("--wavelength-nm", p.wavelength_nm, "[nm] vacuum wavelength");
  add_output(ir, p);

  auto* xs = app->add_subcommand("xsec", "photoionization cross section of one member of a Rydberg series");
  xs->add_option("--model", p.model, "[choice] hydrogenic, burgess or peach")
      ->required()
      ->check(CLI::IsMember({"hydrogenic", "burgess", "peach"}));
  xs->add_option("--series", p.series, "[path] Rydberg series file");
  xs->add_option("--limit", p.limit_cm1, "[cm^-1] ionization limit; overrides the series file");
  xs->add_option("--n", p.n_level, "[count] principal quantum number of the initial level; default: highest member");
  xs->add_option("--wavelength-nm", p.wavelength_nm, "[nm] photon vacuum wavelength");
  xs->add_option("--table-dir", p.table_dir, "[path] directory holding <model>.tab coefficient tables");
  xs->add_option("--table", p.table, "[path] explicit coefficient table; overrides --table-dir");
  add_output(xs, p);

  auto* cr = app->add_subcommand("crystal", "two-ion crystal positions, displacement ratio and axial modes");
  cr->add_option("--nu1", p.nu1_hz, "[Hz] secular frequency of a single bright ion")->required();
  cr->add_option("--eta", p.eta, "[1] ratio nu2/nu1 of single-ion secular frequencies");
  cr->add_option("--q1", p.q1, "[e] charge of the bright ion");
  cr->add_option("--q2", p.q2, "[e] charge of the dark ion");
  cr->add_option("--mass-u", p.mass_u, "[u] ion mass");
  cr->add_option("--invert-from-mode", p.invert_modes,
                 "[MODE=FLOAT Hz] infer eta from a measured mode, e.g. com=800e3 (repeatable)")
      ->type_name("MODE=FLOAT");
  cr->add_option("--invert-from-ratio", p.invert_ratio,
                 "[1] infer q2 from a measured displacement ratio at the inferred (or given) eta");
  add_output(cr, p);

  auto* sc = app->add_subcommand("scan", "simulated fluorescence scan across one drive");
  add_scheme_options(sc, p);
  sc->add_option("--lower", p.lower, "[label] lower level of the scanned drive");
  sc->add_option("--upper", p.upper, "[label] upper level of the scanned drive");
  sc->add_option("--grid-hz", p.grid, "[Hz:Hz:count] detuning grid START:STOP:POINTS")
      ->type_name("FLOAT:FLOAT:UINT");
  sc->add_option("--lifetime-ns", p.lifetime_ns, "[ns] replace the upper-level lifetime");
  sc->add_option("--saturation", p.saturation, "[1] set the scanned drive's saturation parameter");
  sc->add_option("--effective-saturation", p.effective_saturation,
                 "[1] rescale the scanned drive to this effective saturation");
  sc->add_option("--noise-rel", p.noise_rel, "[1] Gaussian noise sigma relative to the noiseless peak");
  sc->add_option("--noise-sigma", p.noise_sigma, "[signal] absolute Gaussian noise sigma");
  sc->add_option("--seed", p.seed, "[count] RNG seed");
  add_output(sc, p);

  auto* fs_ = app->add_subcommand("fit-scan", "Lorentzian fit of a scan and lifetime from its width");
  fs_->add_option("--data", p.data, "[path] scan table: detuning_Hz signal [sigma]")->required();
  fs_->add_option("--saturation", p.fit_saturation, "[1] saturation used for the power-broadening correction");
  add_output(fs_, p);

  auto* sim = app->add_subcommand("simulate", "Monte Carlo time-to-ionization under the chopped sequence");
  sim->add_option("--rate", p.rate, "[1/s] ionization rate while the ionization window is open")->required();
  sim->add_option("--duty", p.duty, "[1] fraction of each cycle with the ionization window open");
  sim->add_option("--chop-hz", p.chop_hz, "[Hz] chopper cycle rate");
  sim->add_option("--trials", p.trials, "[count] number of independent trials");
  sim->add_option("--seed", p.seed, "[count] RNG seed");
  sim->add_option("--max-time-s", p.max_time_s, "[s] give up after this wall time");
  sim->add_option("--failure-prob", p.failure_prob, "[1] probability per window that the attempt is lost");
  sim->add_option("--workers", p.workers, "[count] worker threads; 0 uses all cores");
  sim->add_flag("--summary-only", p.summary_only, "print only the summary table");
  add_output(sim, p);

  auto* vr = app->add_subcommand("verify-roundtrip", "synthetic verification measurement and charge inference");
  vr->add_option("--eta", p.vr_eta, "[1] true eta");
  vr->add_option("--q2", p.vr_q2, "[e] true dark-ion charge");
  vr->add_option("--nu1", p.vr_nu1_hz, "[Hz] bright-ion secular frequency");
  vr->add_option("--noise", p.noise, "[choice] preset: measured (ratio 2%/1.74 per sigma, frequencies 0.2%) or none")
      ->check(CLI::IsMember({"measured", "none"}));
  vr->add_option("--ratio-noise-rel", p.ratio_noise_rel, "[1] relative sigma on the displacement ratio");
  vr->add_option("--freq-noise-rel", p.freq_noise_rel, "[1] relative sigma on each frequency");
  vr->add_option("--seeds", p.seeds, "[count] number of synthetic measurements");
  vr->add_option("--seed", p.seed, "[count] base seed");
  vr->add_option("--tolerance", p.tolerance, "[e] accepted |q2_inferred - q2|");
  add_output(vr, p);

  auto* rp = app->add_subcommand("replay", "re-run the command recorded in a manifest");
  rp->add_option("--manifest", p.manifest, "[path] manifest sidecar")->required();

  return app;
}

// ---------------------------------------------------------------------------

std::string table_row(std::initializer_list<std::string> cells) {
  std::string row;
  for (const auto& c : cells) {
    if (!row.empty()) row += '\t';
    row += c;
  }
  return row + '\n';
}

std::string num(double v) { return format_number(v); }

struct Emitter {
  RunManifest manifest;
  std::string output;

  void add_input(const fs::path& path) { manifest.input_digests.emplace_back(path.string(), sha256_file(path)); }

  void write(const std::string& primary, const std::vector<std::pair<std::string, std::string>>& extras,
             std::ostream& out, std::ostream& err) const {
    if (output.empty()) {
      out << primary;
      for (const auto& [suffix, content] : extras) out << '\n' << content;
      write_manifest(err, manifest);
      return;
    }
    auto put = [](const std::string& path, const std::string& content) {
      std::ofstream f(path, std::ios::binary);
      if (!f) throw DomainError("cannot write " + path);
      f << content;
    };
    put(output, primary);
    for (const auto& [suffix, content] : extras) put(output + suffix, content);
    std::ostringstream m;
    write_manifest(m, manifest);
    put(output + ".manifest", m.str());
  }
};

ResidualPolicy parse_residual(const std::string& s) {
  return s == "route-to-ground" ? ResidualPolicy::route_to_ground : ResidualPolicy::renormalize;
}

double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw CLI::ValidationError(what, "'" + text + "' is not a number");
  return v;
}

LevelScheme apply_overrides(LevelScheme scheme, const std::vector<std::string>& overrides) {
  for (const auto& spec : overrides) {
    const auto a = spec.find(':');
    const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
    if (b == std::string::npos)
      throw CLI::ValidationError("--drive-override", "expected LOWER:UPPER:key=value, got '" + spec + "'");
    const std::string lower = spec.substr(0, a), upper = spec.substr(a + 1, b - a - 1);
    const std::string edits = spec.substr(b + 1);
    if (edits == "off") {
      scheme = scheme.without_drive(lower, upper);
      continue;
    }
    LaserDrive d = scheme.drive(lower, upper);
    std::stringstream list(edits);
    std::string item;
    while (std::getline(list, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--drive-override", "expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const double v = parse_double(item.substr(eq + 1), "--drive-override");
      if (key == "saturation") {
        d.saturation = v;
        d.power_w.reset();
        d.waist_m.reset();
      } else if (key == "power_w") {
        d.power_w = v;
        d.saturation.reset();
      } else if (key == "waist_m") {
        d.waist_m = v;
        d.saturation.reset();
      } else if (key == "detuning_hz") {
        d.detuning_hz = v;
      } else {
        throw CLI::ValidationError("--drive-override", "unknown key '" + key + "'");
      }
    }
    scheme = scheme.with_drive(d);
  }
  return scheme;
}

LevelScheme load_inputs(const Params& p, Emitter& em) {
  const fs::path path = resolve_data_file(p.scheme);
  em.add_input(path);
  return apply_overrides(load_scheme_file(path), p.drive_overrides);
}

// ---------------------------------------------------------------------------

void run_steady_state(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  const LevelScheme scheme = load_inputs(p, em);
  RateOptions opts;
  opts.residual = parse_residual(p.residual);
  const RateMatrix m = build_rate_matrix(scheme, opts);
  const PopulationVector pop = steady_state(m);
  std::string table = table_row({"level", "energy_cm1", "population"});
  for (std::size_t i = 0; i < scheme.levels().size(); ++i)
    table += table_row({scheme.levels()[i].label, num(scheme.levels()[i].energy_cm1),
                        num(pop.populations(static_cast<Eigen::Index>(i)))});
  if (!p.matrix_csv.empty()) {
    std::ofstream f(p.matrix_csv);
    if (!f) throw DomainError("cannot write " + p.matrix_csv);
    f << m.to_csv();
  }
  em.write(table, {}, out, err);
}

void run_ionize_rate(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  const GaussianBeam beam(p.power_w, p.waist_m, p.wavelength_nm);
  const CrossSection sigma = CrossSection::from_megabarn(p.sigma_mb);
  const double flux = photon_flux(beam);
  const double r = ionization_rate(p.p7p, sigma, flux);
  const double c = rate_coefficient(p.p7p, sigma, p.wavelength_nm);
  std::string table = table_row({"p7p", "sigma_mb", "power_w", "waist_m", "wavelength_nm", "photon_flux_m2_s",
                                 "rate_s", "coefficient_m2_j"});
  table += table_row({num(p.p7p), num(p.sigma_mb), num(p.power_w), num(p.waist_m), num(p.wavelength_nm),
                      num(flux), num(r), num(c)});
  em.write(table, {}, out, err);
}

void run_xsec(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  const fs::path series_path = resolve_data_file(p.series);
  em.add_input(series_path);
  RydbergSeries series = load_series(series_path);
  if (p.limit_cm1) series.ionization_limit_cm1 = *p.limit_cm1;
  series.check();

  const RydbergMember* member = &series.members.back();
  if (p.n_level) {
    member = nullptr;
    for (const auto& m : series.members)
      if (m.n == *p.n_level) member = &m;
    if (!member) throw DomainError("series has no member with n = " + std::to_string(*p.n_level));
  }
  PhotoionizationTarget target;
  target.ell_initial = series.ell;
  target.core_charge = series.core_charge;
  target.rydberg_cm1 = series.rydberg_cm1;
  target.n_star = effective_quantum_number(member->energy_cm1, series.ionization_limit_cm1, series.core_charge,
                                           series.rydberg_cm1);
  const double photon_ev = units::wavenumber_to_ev(1e7 / p.wavelength_nm);
  const CrossSectionModel model = parse_cross_section_model(p.model);

  std::optional<double> mu;
  if (series.members.size() >= 2) mu = fit_quantum_defect(series).mu;

  CrossSection sigma = CrossSection::from_megabarn(0.0, model);
  if (model != CrossSectionModel::hydrogenic && !p.table.empty()) {
    const fs::path table_path = resolve_data_file(p.table);
    em.add_input(table_path);
    QdtTable table = load_qdt_table(table_path);
    table.model = model;
    sigma = cross_section_qdt(target, photon_ev, table);
  } else {
    std::optional<fs::path> dir;
    if (model != CrossSectionModel::hydrogenic) {
      for (const auto& d : data_search_path())
        if (fs::is_directory(d / p.table_dir)) {
          dir = d / p.table_dir;
          break;
        }
      if (!dir && fs::is_directory(p.table_dir)) dir = fs::path(p.table_dir);
      if (dir && fs::exists(*dir / (p.model + ".tab"))) em.add_input(*dir / (p.model + ".tab"));
    }
    sigma = cross_section(target, photon_ev, model, dir);
  }

  std::string table = table_row({"model", "n", "energy_cm1", "limit_cm1", "mu_fit", "n_star", "threshold_ev",
                                 "photon_ev", "sigma_mb"});
  table += table_row({to_string(sigma.model()), std::to_string(member->n), num(member->energy_cm1),
                      num(series.ionization_limit_cm1), mu ? num(*mu) : "NA", num(target.n_star),
                      num(threshold_energy_ev(target)), num(photon_ev), num(sigma.megabarn())});
  em.write(table, {}, out, err);
}

void run_crystal(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  TrapAxis trap;
  trap.nu1_hz = p.nu1_hz;
  trap.eta = p.eta;
  trap.ion_mass_kg = p.mass_u * PhysicalConstants::atomic_mass_unit;
  const ChargePair charges{p.q1, p.q2};
  const CrystalState state = crystal_state(trap, charges);

  std::string table = table_row({"quantity", "value"});
  table += table_row({"x1_m", num(state.positions.x1_m)});
  table += table_row({"x2_m", num(state.positions.x2_m)});
  table += table_row({"displacement_ratio", num(displacement_ratio(p.eta, p.q2 / p.q1))});
  table += table_row({"nu_com_hz", num(state.modes.nu_com_hz)});
  table += table_row({"nu_bre_hz", num(state.modes.nu_bre_hz)});

  std::optional<double> eta_inferred;
  if (!p.invert_modes.empty()) {
    double sum = 0.0;
    for (const auto& spec : p.invert_modes) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--invert-from-mode", "expected MODE=FREQ, got '" + spec + "'");
      const Mode mode = parse_mode(spec.substr(0, eq));
      const double eta = infer_eta(parse_double(spec.substr(eq + 1), "--invert-from-mode"), p.nu1_hz, mode);
      table += table_row({"eta_from_" + to_string(mode), num(eta)});
      sum += eta;
    }
    eta_inferred = sum / static_cast<double>(p.invert_modes.size());
    table += table_row({"eta_inferred", num(*eta_inferred)});
  }
  if (p.invert_ratio) {
    const double q2 = p.q1 * infer_charge(*p.invert_ratio, eta_inferred.value_or(p.eta));
    table += table_row({"q2_inferred", num(q2)});
  }
  em.write(table, {}, out, err);
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream s(spec);
  std::string item;
  while (std::getline(s, item, ':')) parts.push_back(item);
  if (parts.size() != 3) throw CLI::ValidationError("--grid-hz", "expected START:STOP:POINTS, got '" + spec + "'");
  const double start = parse_double(parts[0], "--grid-hz"), stop = parse_double(parts[1], "--grid-hz");
  const double n = parse_double(parts[2], "--grid-hz");
  if (!(n >= 1.0) || n != std::floor(n)) throw CLI::ValidationError("--grid-hz", "POINTS must be a positive integer");
  return linear_grid(start, stop, static_cast<std::size_t>(n));
}

void run_scan(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  LevelScheme scheme = load_inputs(p, em);
  const DriveKey key{p.lower, p.upper};
  if (p.lifetime_ns) scheme = scheme.with_lifetime(p.upper, *p.lifetime_ns * 1e-9);
  if (p.saturation) {
    LaserDrive d = scheme.drive(p.lower, p.upper);
    d.saturation = *p.saturation;
    d.power_w.reset();
    d.waist_m.reset();
    scheme = scheme.with_drive(d);
  }
  ScanOptions opts;
  opts.residual = parse_residual(p.residual);
  opts.noise_relative = p.noise_rel;
  opts.noise_sigma = p.noise_sigma;
  opts.seed = p.seed;
  if (p.effective_saturation) scheme = with_effective_saturation(scheme, key, *p.effective_saturation, opts);
  const auto grid = parse_grid(p.grid);
  const ScanCurve curve = simulate_scan(scheme, key, grid, opts);
  std::ostringstream table;
  write_scan(table, curve);
  em.write(table.str(), {}, out, err);
}

void run_fit_scan(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  const fs::path path = resolve_data_file(p.data);
  em.add_input(path);
  std::ifstream in(path);
  const ScanCurve curve = read_scan(in);
  const LorentzianFit fit = fit_lorentzian(curve);
  if (!fit.converged) throw SolverError("Lorentzian fit did not converge: " + fit.diagnostics);

  auto se = [&](int i) { return num(std::sqrt(std::max(0.0, fit.covariance(i, i)))); };
  const double tau = lifetime_from_linewidth(fit.fwhm, p.fit_saturation);
  const double tau_raw = lifetime_from_linewidth(fit.fwhm, 0.0);
  const double fwhm_se = std::sqrt(std::max(0.0, fit.covariance(1, 1)));
  std::string table = table_row({"parameter", "value", "std_error"});
  table += table_row({"center_hz", num(fit.center), se(0)});
  table += table_row({"fwhm_hz", num(fit.fwhm), se(1)});
  table += table_row({"amplitude", num(fit.amplitude), se(2)});
  table += table_row({"offset", num(fit.offset), se(3)});
  table += table_row({"lifetime_s", num(tau), num(tau * fwhm_se / fit.fwhm)});
  table += table_row({"lifetime_uncorrected_s", num(tau_raw), num(tau_raw * fwhm_se / fit.fwhm)});
  table += table_row({"saturation", num(p.fit_saturation), "NA"});
  table += table_row({"iterations", std::to_string(fit.iterations), "NA"});
  em.write(table, {}, out, err);
}

void run_simulate(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  SequenceConfig config;
  config.ionization_rate = p.rate;
  config.ionization_duty = p.duty;
  config.chop_rate_hz = p.chop_hz;
  config.max_time_s = p.max_time_s;
  config.rng_seed = p.seed;
  config.failure_probability = p.failure_prob;
  const auto runs = simulate_ionization_times(config, p.trials, p.workers);
  std::ostringstream summary;
  write_summary(summary, summarize_times(runs));
  if (p.summary_only) {
    em.write(summary.str(), {}, out, err);
    return;
  }
  std::ostringstream table;
  write_runs(table, runs);
  em.write(table.str(), {{".summary", summary.str()}}, out, err);
}

void run_verify_roundtrip(const Params& p, Emitter& em, std::ostream& out, std::ostream& err) {
  TrapAxis trap;
  trap.nu1_hz = p.vr_nu1_hz;
  trap.eta = p.vr_eta;
  VerificationNoise noise = p.noise == "measured" ? kMeasuredNoise : VerificationNoise{};
  if (p.ratio_noise_rel) noise.ratio_relative = *p.ratio_noise_rel;
  if (p.freq_noise_rel) noise.frequency_relative = *p.freq_noise_rel;
  const auto stats = verification_roundtrip(trap, ChargePair{1.0, p.vr_q2}, noise, p.seeds, p.seed, p.tolerance);
  std::string table = table_row({"seeds", "within", "fraction_within", "inversion_errors", "mean_q2", "sd_q2",
                                 "bias_q2"});
  table += table_row({std::to_string(stats.seeds), std::to_string(stats.within), num(stats.fraction_within),
                      std::to_string(stats.inversion_errors), num(stats.mean_q2), num(stats.sd_q2),
                      num(stats.mean_q2 - p.vr_q2)});
  em.write(table, {}, out, err);
}

// Resolved value of every option of the chosen subcommand, for the manifest.
std::vector<std::pair<std::string, std::string>> resolved_parameters(const CLI::App* sub) {
  std::vector<std::pair<std::string, std::string>> params;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h,--help") continue;
    std::string key = opt->get_single_name();
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) value = "NA";
    params.emplace_back(std::move(key), std::move(value));
  }
  return params;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Params p;
  auto app = build_app(p);
  std::vector<const char*> argv{"ybion"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app->exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app->exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  const CLI::App* sub = app->get_subcommands().front();
  const std::string name = sub->get_name();

  if (name == "replay") {
    try {
      std::ifstream in(p.manifest);
      if (!in) throw DomainError("cannot open " + p.manifest);
      const RunManifest m = read_manifest(in);
      if (!m.argv.empty() && m.argv.front() == "replay") throw DomainError("manifest records a replay");
      return dispatch(m.argv, out, err);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kModel;
    }
  }

  Emitter em;
  em.output = p.output;
  em.manifest.subcommand = name;
  em.manifest.argv = args;
  em.manifest.tool_version = kToolVersion;
  em.manifest.timestamp = utc_timestamp();
  em.manifest.parameters = resolved_parameters(sub);
  if (name == "simulate" || name == "scan" || name == "verify-roundtrip") {
    em.manifest.rng_algorithm = Xoshiro256::kAlgorithm;
    em.manifest.seeds.push_back(std::to_string(p.seed));
  }

  try {
    if (name == "steady-state") run_steady_state(p, em, out, err);
    else if (name == "ionize-rate") run_ionize_rate(p, em, out, err);
    else if (name == "xsec") run_xsec(p, em, out, err);
    else if (name == "crystal") run_crystal(p, em, out, err);
    else if (name == "scan") run_scan(p, em, out, err);
    else if (name == "fit-scan") run_fit_scan(p, em, out, err);
    else if (name == "simulate") run_simulate(p, em, out, err);
    else if (name == "verify-roundtrip") run_verify_roundtrip(p, em, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kModel;
  }
  return kOk;
}

std::vector<std::string> subcommand_names() {
  Params p;
  auto app = build_app(p);
  std::vector<std::string> names;
  for (const auto* sub : app->get_subcommands({})) names.push_back(sub->get_name());
  return names;
}

std::string help_text(const std::string& subcommand) {
  Params p;
  auto app = build_app(p);
  if (subcommand.empty()) return app->help();
  return app->get_subcommand(subcommand)->help();
}

std::vector<FlagDoc> flag_docs() {
  Params p;
  auto app = build_app(p);
  std::vector<FlagDoc> docs;
  for (const auto* sub : app->get_subcommands({})) {
    for (const CLI::Option* opt : sub->get_options()) {
      if (opt->get_single_name() == "help") continue;
      FlagDoc d;
      d.subcommand = sub->get_name();
      d.flag = "--" + opt->get_single_name();
      d.type_name = opt->get_type_name();
      d.description = opt->get_description();
      d.default_value = opt->get_default_str();
      d.numeric = d.type_name.find("FLOAT") != std::string::npos || d.type_name.find("INT") != std::string::npos;
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

}  // namespace ybion::cli

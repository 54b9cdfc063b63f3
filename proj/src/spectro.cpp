#include "ybion/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ybion/constants.hpp"
#include "ybion/error.hpp"
#include "ybion/format.hpp"
#include "ybion/random.hpp"

namespace ybion {

void ScanCurve::check() const {
  if (detunings_hz.size() != fluorescence.size())
    throw DomainError("scan curve columns differ in length");
  if (noise_sigma && noise_sigma->size() != detunings_hz.size())
    throw DomainError("scan curve sigma column differs in length");
  for (std::size_t i = 1; i < detunings_hz.size(); ++i)
    if (!(detunings_hz[i] > detunings_hz[i - 1]))
      throw DomainError("scan detunings must be strictly increasing");
  for (double f : fluorescence)
    if (!(f >= 0.0)) throw DomainError("scan fluorescence must be >= 0");
}

namespace {

void require_scan_preconditions(const LevelScheme& scheme, const DriveKey& key) {
  scheme.drive(key.lower, key.upper);
  for (const auto& d : scheme.drives()) {
    if (d.lower == key.lower && d.upper == key.upper) continue;
    const bool active = d.saturation ? *d.saturation > 0.0 : true;
    if (d.lower == key.lower && active)
      throw DomainError("drive " + d.lower + "->" + d.upper + " also depletes " + key.lower +
                        "; switch it off for the scan");
  }
}

double signal(const LevelScheme& scheme, const ScanOptions& options) {
  RateOptions ro;
  ro.residual = options.residual;
  const auto p = steady_state(build_rate_matrix(scheme, ro));
  return p[options.fluorescence_upper] *
         spontaneous_rate(scheme, options.fluorescence_upper, options.fluorescence_lower, options.residual);
}

LaserDrive as_saturation_drive(const LevelScheme& scheme, const LaserDrive& drive, double scale) {
  LaserDrive d = drive;
  const double s = saturation_parameter(drive, *scheme.level(drive.upper).lifetime_s);
  d.power_w.reset();
  d.waist_m.reset();
  d.saturation = s * scale;
  return d;
}

}  // namespace

ScanCurve simulate_scan(const LevelScheme& scheme, const DriveKey& key,
                        std::span<const double> grid, const ScanOptions& options) {
  if (grid.empty()) throw DomainError("scan grid is empty");
  require_scan_preconditions(scheme, key);
  const LaserDrive base = scheme.drive(key.lower, key.upper);

  ScanCurve curve;
  curve.detunings_hz.assign(grid.begin(), grid.end());
  curve.fluorescence.reserve(grid.size());
  for (double delta : grid) {
    LaserDrive d = base;
    d.detuning_hz = delta;
    curve.fluorescence.push_back(signal(scheme.with_drive(d), options));
  }

  const double peak = *std::max_element(curve.fluorescence.begin(), curve.fluorescence.end());
  const double sigma = options.noise_sigma + options.noise_relative * peak;
  if (sigma > 0.0) {
    Xoshiro256 rng(options.seed);
    for (auto& f : curve.fluorescence) f = std::max(0.0, f + sigma * rng.normal());
    curve.noise_sigma = std::vector<double>(grid.size(), sigma);
  }
  curve.check();
  return curve;
}

double effective_saturation(const LevelScheme& scheme, const DriveKey& key, const ScanOptions& options) {
  require_scan_preconditions(scheme, key);
  LaserDrive resonant = as_saturation_drive(scheme, scheme.drive(key.lower, key.upper), 1.0);
  resonant.detuning_hz = 0.0;
  const double s = *resonant.saturation;
  if (!(s > 0.0)) return 0.0;

  auto at = [&](double scale) {
    LaserDrive d = resonant;
    d.saturation = s * scale;
    return signal(scheme.with_drive(d), options);
  };
  // g(W) = f(W) - f(0) = alpha W / (1 + beta W); with r = g(2W)/g(W),
  // beta W = (2 - r) / (2 (r - 1)).
  const double f0 = at(0.0);
  const double g1 = at(1.0) - f0;
  const double g2 = at(2.0) - f0;
  if (!(g1 > 0.0)) throw DomainError("scanned drive does not change the fluorescence signal");
  const double r = g2 / g1;
  return (2.0 - r) / (2.0 * (r - 1.0));
}

LevelScheme with_effective_saturation(const LevelScheme& scheme, const DriveKey& key, double target,
                                      const ScanOptions& options) {
  if (!(target > 0.0)) throw DomainError("target effective saturation must be > 0");
  const double current = effective_saturation(scheme, key, options);
  if (!(current > 0.0)) throw DomainError("scanned drive has zero effective saturation");
  // beta W is linear in the drive's saturation parameter.
  return scheme.with_drive(as_saturation_drive(scheme, scheme.drive(key.lower, key.upper), target / current));
}

double lorentzian(double x, double center, double fwhm, double amplitude, double offset) {
  const double u = 2.0 * (x - center) / fwhm;
  return offset + amplitude / (1.0 + u * u);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Evaluation {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

// Model in scaled coordinates; p = (center, fwhm, amplitude, offset).
Evaluation evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    const Eigen::Vector4d& p) {
  const Eigen::Index n = x.size();
  Evaluation e{Eigen::VectorXd(n), Eigen::MatrixXd(n, 4)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = 2.0 * (x(i) - p(0)) / p(1);
    const double d = 1.0 + u * u;
    const double model = p(3) + p(2) / d;
    e.residual(i) = w(i) * (model - y(i));
    e.jacobian(i, 0) = w(i) * p(2) * 4.0 * u / (p(1) * d * d);
    e.jacobian(i, 1) = w(i) * p(2) * 2.0 * u * u / (p(1) * d * d);
    e.jacobian(i, 2) = w(i) / d;
    e.jacobian(i, 3) = w(i);
  }
  return e;
}

}  // namespace

LorentzianFit fit_lorentzian(const ScanCurve& curve) {
  curve.check();
  const std::size_t n = curve.size();
  if (n < 8) throw DomainError("Lorentzian fit needs at least 8 points");
  const auto& xs = curve.detunings_hz;
  const auto& ys = curve.fluorescence;

  LorentzianFit fit;
  const std::size_t edge = std::max<std::size_t>(2, n / 10);
  std::vector<double> edges(ys.begin(), ys.begin() + edge);
  edges.insert(edges.end(), ys.end() - edge, ys.end());
  const double offset0 = median(edges);
  const std::size_t ipk = std::max_element(ys.begin(), ys.end()) - ys.begin();
  const double amp0 = ys[ipk] - offset0;
  const double y_scale = std::max(std::abs(ys[ipk]), 1e-300);
  if (!(amp0 > 1e-12 * y_scale) || ys[ipk] == 0.0) {
    fit.diagnostics = "no peak above the offset";
    return fit;
  }
  const double half = offset0 + 0.5 * amp0;
  auto crossing = [&](int dir) -> std::optional<double> {
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(ipk); i + dir >= 0 && i + dir < static_cast<std::ptrdiff_t>(n); i += dir) {
      const double ya = ys[i], yb = ys[i + dir];
      if (yb < half) {
        const double t = (ya - half) / (ya - yb);
        return xs[i] + t * (xs[i + dir] - xs[i]);
      }
    }
    return std::nullopt;
  };
  const auto left = crossing(-1), right = crossing(+1);
  double fwhm0 = 0.0;
  if (left && right)
    fwhm0 = *right - *left;
  else if (left)
    fwhm0 = 2.0 * (xs[ipk] - *left);
  else if (right)
    fwhm0 = 2.0 * (*right - xs[ipk]);
  else
    fwhm0 = 0.25 * (xs.back() - xs.front());
  if (xs.back() - xs.front() < 2.0 * fwhm0)
    throw DomainError("scan must span at least two estimated FWHM");

  // Scaled coordinates keep the normal equations well conditioned.
  const double x_mid = xs[ipk];
  const double x_scale = fwhm0;
  Eigen::VectorXd x(n), y(n), wts(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i) = (xs[i] - x_mid) / x_scale;
    y(i) = ys[i] / y_scale;
    wts(i) = curve.noise_sigma ? y_scale / (*curve.noise_sigma)[i] : 1.0;
  }
  if (curve.noise_sigma) {
    const double wmax = wts.maxCoeff();
    wts /= wmax;  // only relative weights matter for the minimizer
  }

  Eigen::Vector4d p(0.0, 1.0, amp0 / y_scale, offset0 / y_scale);
  auto eval = evaluate(x, y, wts, p);
  double chi2 = eval.residual.squaredNorm();
  double lambda = 1e-3;
  double last_rel_step = 1.0;
  constexpr int kMaxIterations = 500;
  for (int it = 1; it <= kMaxIterations; ++it) {
    fit.iterations = it;
    const Eigen::Matrix4d jtj = eval.jacobian.transpose() * eval.jacobian;
    const Eigen::Vector4d grad = eval.jacobian.transpose() * eval.residual;
    Eigen::Matrix4d a = jtj;
    a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
    const Eigen::Vector4d step = a.ldlt().solve(-grad);
    const Eigen::Vector4d trial = p + step;
    if (!(trial(1) != 0.0) || !trial.allFinite()) {
      lambda *= 10.0;
      continue;
    }
    auto trial_eval = evaluate(x, y, wts, trial);
    const double trial_chi2 = trial_eval.residual.squaredNorm();
    if (trial_chi2 <= chi2) {
      double rel = 0.0;
      for (int k = 0; k < 4; ++k) {
        // center is measured against the fwhm since it may sit at zero
        const double ref = k == 0 ? std::abs(trial(1)) : std::max(std::abs(trial(k)), 1e-12);
        rel = std::max(rel, std::abs(step(k)) / ref);
      }
      p = trial;
      eval = std::move(trial_eval);
      chi2 = trial_chi2;
      lambda = std::max(lambda / 10.0, 1e-12);
      last_rel_step = rel;
      if (rel < 1e-9) {
        fit.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        // No downhill step left at rounding level.
        fit.converged = last_rel_step < 1e-6;
        if (!fit.converged) fit.diagnostics = "step control failed";
        break;
      }
    }
    if (it == kMaxIterations) fit.diagnostics = "iteration limit reached";
  }

  fit.center = x_mid + p(0) * x_scale;
  fit.fwhm = std::abs(p(1)) * x_scale;
  fit.amplitude = p(2) * y_scale;
  fit.offset = p(3) * y_scale;
  if (fit.converged && !(fit.amplitude > 0.0)) {
    fit.converged = false;
    fit.diagnostics = "fit converged to a non-positive amplitude";
  }

  // Covariance in physical units.
  Eigen::MatrixXd jac(n, 4);
  double chi2_phys = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = 2.0 * (xs[i] - fit.center) / fit.fwhm;
    const double d = 1.0 + u * u;
    const double wi = curve.noise_sigma ? 1.0 / (*curve.noise_sigma)[i] : 1.0;
    const double r = lorentzian(xs[i], fit.center, fit.fwhm, fit.amplitude, fit.offset) - ys[i];
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
    chi2_phys += wi * wi * r * r;
    jac(static_cast<Eigen::Index>(i), 0) = wi * fit.amplitude * 4.0 * u / (fit.fwhm * d * d);
    jac(static_cast<Eigen::Index>(i), 1) = wi * fit.amplitude * 2.0 * u * u / (fit.fwhm * d * d);
    jac(static_cast<Eigen::Index>(i), 2) = wi / d;
    jac(static_cast<Eigen::Index>(i), 3) = wi;
  }
  const Eigen::Matrix4d info = jac.transpose() * jac;
  // Parameters differ by many decades (Hz against signal units); equilibrate
  // before inverting so the rank decision is not driven by units.
  const Eigen::Vector4d scale = info.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::Matrix4d info_eq = scale.asDiagonal() * info * scale.asDiagonal();
  Eigen::Matrix4d cov =
      scale.asDiagonal() * Eigen::Matrix4d(info_eq.completeOrthogonalDecomposition().pseudoInverse()) *
      scale.asDiagonal();
  if (!curve.noise_sigma) cov *= chi2_phys / static_cast<double>(n - 4);
  fit.covariance = cov;
  return fit;
}

double lifetime_from_linewidth(double fwhm_hz, double saturation) {
  if (!(fwhm_hz > 0.0)) throw DomainError("fwhm must be > 0");
  if (!(saturation >= 0.0)) throw DomainError("saturation must be >= 0");
  const double natural = fwhm_hz / std::sqrt(1.0 + saturation);
  return 1.0 / (two_pi * natural);
}

std::vector<double> linear_grid(double start, double stop, std::size_t points) {
  if (points < 2) throw DomainError("grid needs at least 2 points");
  if (!(stop > start)) throw DomainError("grid stop must exceed start");
  std::vector<double> grid(points);
  const double step = (stop - start) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = start + step * static_cast<double>(i);
  grid.back() = stop;
  return grid;
}

ScanCurve read_scan(std::istream& in) {
  ScanCurve curve;
  std::vector<double> sigma;
  std::string line;
  std::size_t lineno = 0, columns = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    std::vector<double> values;
    std::string token;
    bool header = false;
    while (row >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) header = true;
      } catch (const std::exception&) {
        header = true;
      }
    }
    if (values.empty() && !header) continue;
    if (header) {
      if (!curve.detunings_hz.empty()) throw ParseError(lineno, "non-numeric row inside scan data");
      continue;
    }
    if (values.size() != 2 && values.size() != 3) throw ParseError(lineno, "scan rows need 2 or 3 columns");
    if (columns == 0) columns = values.size();
    if (values.size() != columns) throw ParseError(lineno, "inconsistent column count");
    curve.detunings_hz.push_back(values[0]);
    curve.fluorescence.push_back(values[1]);
    if (columns == 3) sigma.push_back(values[2]);
  }
  if (columns == 3) curve.noise_sigma = std::move(sigma);
  curve.check();
  return curve;
}

void write_scan(std::ostream& out, const ScanCurve& curve) {
  out << "detuning_Hz\tsignal";
  if (curve.noise_sigma) out << "\tsigma";
  out << '\n';
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << format_number(curve.detunings_hz[i]) << '\t' << format_number(curve.fluorescence[i]);
    if (curve.noise_sigma) out << '\t' << format_number((*curve.noise_sigma)[i]);
    out << '\n';
  }
}

}  // namespace ybion

#include "ybion/rates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ybion/constants.hpp"
#include "ybion/error.hpp"
#include "ybion/format.hpp"
#include "ybion/ode.hpp"

namespace ybion {

std::size_t RateMatrix::index(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  throw DomainError("unknown level '" + std::string(label) + "'");
}

std::string RateMatrix::to_csv() const {
  std::ostringstream out;
  out << "to\\from";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < entries.rows(); ++i) {
    out << labels[i];
    for (Eigen::Index j = 0; j < entries.cols(); ++j) out << ',' << format_number(entries(i, j));
    out << '\n';
  }
  return out.str();
}

double PopulationVector::operator[](std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return populations(static_cast<Eigen::Index>(i));
  throw DomainError("unknown level '" + std::string(label) + "'");
}

double decay_rate(const Level& level) {
  if (!level.lifetime_s) throw DomainError("level " + level.label + " has no lifetime");
  return 1.0 / *level.lifetime_s;
}

double saturation_intensity(double wavelength_nm, double upper_lifetime_s) {
  const double lambda = wavelength_nm * units::nm;
  return std::numbers::pi * PhysicalConstants::hc / (3.0 * lambda * lambda * lambda * upper_lifetime_s);
}

double saturation_parameter(const LaserDrive& drive, double upper_lifetime_s) {
  if (drive.saturation) return *drive.saturation;
  const double w0 = *drive.waist_m;
  const double peak_intensity = 2.0 * *drive.power_w / (std::numbers::pi * w0 * w0);
  return peak_intensity / saturation_intensity(drive.wavelength_nm, upper_lifetime_s);
}

double stimulated_rate(const LaserDrive& drive, double upper_lifetime_s) {
  const double a = 1.0 / upper_lifetime_s;
  const double gamma_hz = a / two_pi;
  const double x = 2.0 * drive.detuning_hz / gamma_hz;
  return 0.5 * a * saturation_parameter(drive, upper_lifetime_s) / (1.0 + x * x);
}

double spontaneous_rate(const LevelScheme& scheme, std::string_view upper, std::string_view lower,
                        ResidualPolicy policy) {
  const double sum = scheme.branching_sum(upper);
  double ratio = 0.0;
  for (const auto& d : scheme.decays())
    if (d.upper == upper && d.lower == lower) ratio = d.branching_ratio;
  if (policy == ResidualPolicy::renormalize) {
    if (sum > 0.0) ratio /= sum;
  } else if (lower == scheme.ground().label && sum > 0.0) {
    ratio += std::max(0.0, 1.0 - sum);
  }
  if (ratio == 0.0) return 0.0;
  return ratio * decay_rate(scheme.level(upper));
}

RateMatrix build_rate_matrix(const LevelScheme& scheme, const RateOptions& options) {
  const auto& levels = scheme.levels();
  const std::size_t n = levels.size();
  const std::size_t dim = n + (options.include_ionization ? 1 : 0);

  RateMatrix m;
  m.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.has_sink = options.include_ionization;
  for (const auto& l : levels) m.labels.push_back(l.label);
  if (m.has_sink) m.labels.emplace_back(kSinkLabel);

  auto add = [&](std::size_t from, std::size_t to, double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate))
      throw DomainError("negative or non-finite rate " + m.labels[from] + "->" + m.labels[to]);
    m.entries(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) += rate;
  };

  const std::size_t ground = scheme.index_of(scheme.ground().label);
  for (std::size_t u = 0; u < n; ++u) {
    const Level& upper = levels[u];
    const double sum = scheme.branching_sum(upper.label);
    if (sum == 0.0) continue;
    const double a_total = decay_rate(upper);
    const double residual = std::max(0.0, 1.0 - sum);
    for (const auto& d : scheme.decays()) {
      if (d.upper != upper.label) continue;
      const double ratio =
          options.residual == ResidualPolicy::renormalize ? d.branching_ratio / sum : d.branching_ratio;
      add(u, scheme.index_of(d.lower), ratio * a_total);
    }
    if (options.residual == ResidualPolicy::route_to_ground && residual > 0.0 && u != ground)
      add(u, ground, residual * a_total);
  }

  for (const auto& d : scheme.drives()) {
    const Level& upper = scheme.level(d.upper);
    if (!upper.lifetime_s)
      throw DomainError("drive " + d.lower + "->" + d.upper + ": upper level has no lifetime");
    const double w = stimulated_rate(d, *upper.lifetime_s);
    const std::size_t iu = scheme.index_of(d.upper), il = scheme.index_of(d.lower);
    add(il, iu, w);
    add(iu, il, w);
  }

  if (m.has_sink) {
    if (!(options.ionization_rate >= 0.0))
      throw DomainError("ionization rate must be >= 0");
    add(scheme.index_of(options.ionizing_level), n, options.ionization_rate);
  }

  for (Eigen::Index j = 0; j < m.entries.cols(); ++j) {
    m.entries(j, j) = 0.0;
    m.entries(j, j) = -m.entries.col(j).sum();
  }
  return m;
}

namespace {

// Closed communicating classes of the transition graph (edge j -> i when
// entry (i, j) > 0). Their count is the null-space dimension of the generator.
std::vector<std::vector<std::size_t>> closed_classes(const Eigen::MatrixXd& q) {
  const std::size_t n = static_cast<std::size_t>(q.rows());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    reach[i][i] = 1;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0) reach[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = 1;

  std::vector<std::vector<std::size_t>> classes;
  std::vector<char> assigned(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i]) continue;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i]) members.push_back(j);
    for (auto j : members) assigned[j] = 1;
    bool closed = true;
    for (auto a : members)
      for (std::size_t b = 0; b < n && closed; ++b)
        if (reach[a][b] && !reach[b][a]) closed = false;
    if (closed) classes.push_back(std::move(members));
  }
  return classes;
}

// Grassmann-Taksar-Heyman elimination for the stationary vector of an
// irreducible generator. Subtraction-free, so rates spanning many decades
// (ms-lived metastables next to saturated ns transitions) stay accurate.
Eigen::VectorXd gth_stationary(const Eigen::MatrixXd& generator) {
  const Eigen::Index n = generator.rows();
  // rate(i -> j) in row-major Markov convention
  Eigen::MatrixXd p = generator.transpose();
  for (Eigen::Index i = 0; i < n; ++i) p(i, i) = 0.0;
  for (Eigen::Index k = n - 1; k > 0; --k) {
    const double s = p.row(k).head(k).sum();
    if (!(s > 0.0)) throw SolverError("rate matrix is reducible");
    for (Eigen::Index i = 0; i < k; ++i) {
      const double f = p(i, k) / s;
      if (f == 0.0) continue;
      for (Eigen::Index j = 0; j < k; ++j)
        if (j != i) p(i, j) += f * p(k, j);
    }
  }
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
  pi(0) = 1.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    double flow = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) flow += pi(i) * p(i, k);
    pi(k) = flow / p.row(k).head(k).sum();
  }
  return pi / pi.sum();
}

}  // namespace

PopulationVector steady_state(const RateMatrix& m) {
  Eigen::MatrixXd q = m.entries;
  std::vector<std::string> labels = m.labels;
  const Eigen::Index n_full = q.rows();
  Eigen::Index n = n_full;
  if (m.has_sink) {
    const Eigen::Index s = n_full - 1;
    if (q.row(s).cwiseAbs().maxCoeff() > 0.0 || q.col(s).cwiseAbs().maxCoeff() > 0.0)
      throw SolverError("steady state requires the ionization sink to be disabled");
    n = s;
  }
  const Eigen::MatrixXd sub = q.topLeftCorner(n, n);
  const auto classes = closed_classes(sub);
  if (classes.size() != 1) {
    std::ostringstream msg;
    msg << "null space dimension " << classes.size() << ": disconnected level groups";
    for (const auto& c : classes) {
      msg << " {";
      for (std::size_t i = 0; i < c.size(); ++i) msg << (i ? "," : "") << labels[c[i]];
      msg << '}';
    }
    throw SolverError(msg.str());
  }
  const auto& members = classes.front();
  const Eigen::Index k = static_cast<Eigen::Index>(members.size());
  Eigen::MatrixXd restricted(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      restricted(a, b) = sub(static_cast<Eigen::Index>(members[a]), static_cast<Eigen::Index>(members[b]));

  Eigen::VectorXd pi = k == 1 ? Eigen::VectorXd::Ones(1) : gth_stationary(restricted);
  PopulationVector out;
  out.labels = labels;
  out.populations = Eigen::VectorXd::Zero(n_full);
  for (Eigen::Index a = 0; a < k; ++a) out.populations(static_cast<Eigen::Index>(members[a])) = pi(a);

  const double residual = (q * out.populations).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * m.max_magnitude())
    throw SolverError("steady-state residual " + format_sci(residual, 3) + " exceeds tolerance");
  return out;
}

PopulationVector evolve(const RateMatrix& m, const PopulationVector& p0, double t,
                        const EvolveOptions& options) {
  if (!(t >= 0.0)) throw DomainError("evolve: time must be >= 0");
  if (p0.populations.size() != static_cast<Eigen::Index>(m.dimension()))
    throw DomainError("evolve: population vector does not match the rate matrix");
  const double total = p0.populations.sum();
  if (std::abs(total - 1.0) > 1e-9 || p0.populations.minCoeff() < 0.0)
    throw DomainError("evolve: initial populations must be a probability vector");

  PopulationVector out = p0;
  out.labels = m.labels;
  out.populations = ode::integrate_linear(m.entries, p0.populations, t, options.rtol, options.atol,
                                          options.max_steps);
  out.populations = out.populations.cwiseMax(0.0);
  out.time_s = p0.time_s.value_or(0.0) + t;
  return out;
}

double excitation_probability(const PopulationVector& p, std::string_view label) { return p[label]; }

PopulationVector pure_state(const RateMatrix& m, std::string_view label) {
  PopulationVector p;
  p.labels = m.labels;
  p.populations = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.dimension()));
  p.populations(static_cast<Eigen::Index>(m.index(label))) = 1.0;
  p.time_s = 0.0;
  return p;
}

}  // namespace ybion

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ybion/constants.hpp"
#include "ybion/error.hpp"
#include "ybion/spectro.hpp"

using namespace ybion;

namespace {

const std::string kBundled = std::string(YBION_TEST_DATA_DIR) + "/yb174_plus.scheme";
const DriveKey k245{"5d32", "7p12"};

ScanCurve synthetic(double center, double fwhm, double amp, double offset, std::size_t n, double span,
                    double noise = 0.0, unsigned seed = 0) {
  ScanCurve c;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -span / 2 + span * static_cast<double>(i) / static_cast<double>(n - 1);
    const double u = 2.0 * (x - center) / fwhm;
    double y = offset + amp / (1.0 + u * u);
    if (noise > 0.0) y = std::max(0.0, y + noise * amp * g(rng));
    c.detunings_hz.push_back(x);
    c.fluorescence.push_back(y);
  }
  return c;
}

LevelScheme scan_scheme(double tau, double s_eff) {
  const auto s = load_scheme_file(kBundled).with_lifetime("7p12", tau);
  return with_effective_saturation(s, k245, s_eff);
}

}  // namespace

TEST_CASE("lifetime from linewidth") {
  CHECK(lifetime_from_linewidth(11.789e6, 0.0) == doctest::Approx(13.5e-9).epsilon(1e-4));
  const double natural = 1.0 / (2.0 * M_PI * 13.5e-9);
  CHECK(lifetime_from_linewidth(natural * std::sqrt(1.02), 0.02) == doctest::Approx(13.5e-9).epsilon(1e-12));
  CHECK(std::sqrt(1.02) == doctest::Approx(1.00995).epsilon(1e-5));
  CHECK(lifetime_from_linewidth(2 * 11.789e6, 0.0) == doctest::Approx(0.5 * lifetime_from_linewidth(11.789e6, 0.0)));
  CHECK_THROWS_AS(lifetime_from_linewidth(0.0, 0.0), DomainError);
  CHECK_THROWS_AS(lifetime_from_linewidth(1e6, -0.1), DomainError);
}

TEST_CASE("fit recovers a noiseless Lorentzian") {
  const auto c = synthetic(1.3e6, 11.8e6, 2.5e-3, 4e-4, 121, 120e6);
  const auto f = fit_lorentzian(c);
  REQUIRE(f.converged);
  CHECK(f.center == doctest::Approx(1.3e6).epsilon(1e-6));
  CHECK(f.fwhm == doctest::Approx(11.8e6).epsilon(1e-6));
  CHECK(f.amplitude == doctest::Approx(2.5e-3).epsilon(1e-6));
  CHECK(f.offset == doctest::Approx(4e-4).epsilon(1e-6));
  CHECK(f.max_abs_residual <= 1e-8 * f.amplitude);
}

TEST_CASE("fit under 1% noise, 200 points, 100 seeds") {
  std::vector<double> errors;
  for (unsigned seed = 0; seed < 100; ++seed) {
    const auto c = synthetic(0.0, 11.8e6, 1.0, 0.05, 200, 120e6, 0.01, seed);
    const auto f = fit_lorentzian(c);
    REQUIRE(f.converged);
    errors.push_back(std::abs(f.fwhm / 11.8e6 - 1.0));
  }
  std::sort(errors.begin(), errors.end());
  MESSAGE("median |dfwhm|/fwhm = " << errors[50] << ", max = " << errors.back());
  CHECK(errors.back() <= 0.03);
}

TEST_CASE("fit degenerate inputs") {
  SUBCASE("flat curve") {
    const auto c = synthetic(0.0, 1e6, 0.0, 1.0, 50, 20e6);
    const auto f = fit_lorentzian(c);
    CHECK_FALSE(f.converged);
    CHECK(f.diagnostics.find("no peak") != std::string::npos);
  }
  SUBCASE("all zero") {
    const auto c = synthetic(0.0, 1e6, 0.0, 0.0, 50, 20e6);
    CHECK_FALSE(fit_lorentzian(c).converged);
  }
  SUBCASE("too few points") { CHECK_THROWS_AS(fit_lorentzian(synthetic(0.0, 1e6, 1.0, 0.0, 7, 20e6)), DomainError); }
  SUBCASE("span below two FWHM") {
    CHECK_THROWS_AS(fit_lorentzian(synthetic(0.0, 10e6, 1.0, 0.0, 40, 12e6)), DomainError);
  }
}

TEST_CASE("covariance scales with the noise level") {
  auto c = synthetic(0.0, 10e6, 1.0, 0.0, 200, 100e6, 0.01, 3);
  c.noise_sigma = std::vector<double>(c.size(), 0.01);
  const auto f = fit_lorentzian(c);
  REQUIRE(f.converged);
  const double fwhm_sigma = std::sqrt(f.covariance(1, 1));
  CHECK(fwhm_sigma > 0.0);
  CHECK(fwhm_sigma < 0.03 * 10e6);
  CHECK(std::abs(f.fwhm - 10e6) < 5.0 * fwhm_sigma);
}

TEST_CASE("simulated scan of the bundled scheme") {
  const auto scheme = scan_scheme(13.5e-9, 0.02);
  const double gamma = 1.0 / (2.0 * M_PI * 13.5e-9);
  const auto grid = linear_grid(-60e6, 60e6, 241);
  const auto curve = simulate_scan(scheme, k245, grid);

  SUBCASE("maximum at zero detuning") {
    const auto ipk = std::max_element(curve.fluorescence.begin(), curve.fluorescence.end()) - curve.fluorescence.begin();
    CHECK(curve.detunings_hz[ipk] == doctest::Approx(0.0));
  }
  SUBCASE("symmetric under detuning sign flip") {
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(std::abs(curve.fluorescence[i] - curve.fluorescence[grid.size() - 1 - i]) <=
            1e-9 * curve.fluorescence[120]);
  }
  SUBCASE("far tail within 2% of the peak above offset") {
    const double fwhm = gamma * std::sqrt(1.02);
    const auto far = simulate_scan(scheme, k245, std::vector<double>{-1e12, -10 * fwhm, 0.0, 10 * fwhm});
    const double offset = far.fluorescence[0], peak = far.fluorescence[2] - offset;
    CHECK((far.fluorescence[1] - offset) <= 0.02 * peak);
    CHECK((far.fluorescence[3] - offset) <= 0.02 * peak);
  }
  SUBCASE("shape is an exact Lorentzian with the broadened width") {
    const auto fit = fit_lorentzian(curve);
    REQUIRE(fit.converged);
    CHECK(fit.fwhm == doctest::Approx(gamma * std::sqrt(1.02)).epsilon(1e-7));
    CHECK(fit.max_abs_residual <= 1e-8 * fit.amplitude);
    CHECK(effective_saturation(scheme, k245) == doctest::Approx(0.02).epsilon(1e-9));
  }
}

TEST_CASE("end-to-end lifetime recovery at low saturation") {
  for (double s : {0.005, 0.02, 0.05}) {
    for (double tau : {8e-9, 13.5e-9, 24.6e-9}) {
      const auto scheme = scan_scheme(tau, s);
      const auto curve = simulate_scan(scheme, k245, linear_grid(-80e6, 80e6, 161));
      const auto fit = fit_lorentzian(curve);
      REQUIRE(fit.converged);
      CHECK(lifetime_from_linewidth(fit.fwhm, s) == doctest::Approx(tau).epsilon(1e-6));
      // Without the broadening correction the lifetime is biased short by sqrt(1 + S).
      CHECK(lifetime_from_linewidth(fit.fwhm, 0.0) == doctest::Approx(tau / std::sqrt(1.0 + s)).epsilon(1e-6));
    }
  }
}

TEST_CASE("scan preconditions and noise") {
  const auto base = load_scheme_file(kBundled);
  SUBCASE("a second drive depleting the scanned lower level is refused") {
    LaserDrive repump{"1[3/2]3/2", "5d32", 1e7 / (34575.4 - 22960.80), std::nullopt, std::nullopt, 10.0, 0.0, true};
    const auto with935 = LevelScheme::create(base.levels(), base.decays(),
                                             [&] {
                                               auto d = base.drives();
                                               d.push_back(repump);
                                               return d;
                                             }(),
                                             base.ionization_limit_cm1());
    CHECK_THROWS_AS(simulate_scan(with935, k245, linear_grid(-1e6, 1e6, 3)), DomainError);
  }
  SUBCASE("empty grid") { CHECK_THROWS_AS(simulate_scan(base, k245, std::vector<double>{}), DomainError); }
  SUBCASE("noise is reproducible and nonnegative") {
    ScanOptions opts;
    opts.noise_relative = 0.01;
    opts.seed = 77;
    const auto scheme = scan_scheme(13.5e-9, 0.02);
    const auto grid = linear_grid(-60e6, 60e6, 101);
    const auto a = simulate_scan(scheme, k245, grid, opts);
    const auto b = simulate_scan(scheme, k245, grid, opts);
    CHECK(a.fluorescence == b.fluorescence);
    REQUIRE(a.noise_sigma.has_value());
    for (double f : a.fluorescence) CHECK(f >= 0.0);
    opts.seed = 78;
    CHECK(simulate_scan(scheme, k245, grid, opts).fluorescence != a.fluorescence);
  }
}

TEST_CASE("scan table round trip") {
  auto c = synthetic(0.0, 1e6, 1.0, 0.1, 20, 10e6);
  std::stringstream two;
  write_scan(two, c);
  const auto back = read_scan(two);
  CHECK(back.detunings_hz == c.detunings_hz);
  CHECK(back.fluorescence == c.fluorescence);
  CHECK_FALSE(back.noise_sigma.has_value());

  c.noise_sigma = std::vector<double>(c.size(), 0.25);
  std::stringstream three;
  write_scan(three, c);
  const auto back3 = read_scan(three);
  REQUIRE(back3.noise_sigma.has_value());
  CHECK(*back3.noise_sigma == *c.noise_sigma);

  std::stringstream bad("0 1\n1 2 3\n");
  CHECK_THROWS_AS(read_scan(bad), ParseError);
  std::stringstream unsorted("1 1\n0 2\n");
  CHECK_THROWS_AS(read_scan(unsorted), DomainError);
}

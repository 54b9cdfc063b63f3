#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "ybion/constants.hpp"
#include "ybion/crystal.hpp"
#include "ybion/error.hpp"
#include "oracles.hpp"

using namespace ybion;

namespace {

using oracle::hessian_modes;
using oracle::kMass;
using oracle::minimize_potential;

}  // namespace

TEST_CASE("equilibrium positions agree with direct minimization") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double nu1 = 1e5 + 2e6 * u(rng), eta = 1.0 + 4.0 * u(rng), q2 = 0.5 + 2.5 * u(rng);
    TrapAxis trap{nu1, kMass, eta};
    const auto analytic = equilibrium_positions(trap, {1.0, q2});
    const auto numeric = minimize_potential(nu1, eta, 1.0, q2, 4.0 * analytic.x1_m * (0.5 + u(rng)),
                                            -4.0 * analytic.x1_m * (0.5 + u(rng)));
    CHECK(analytic.x1_m == doctest::Approx(numeric.x1).epsilon(1e-10));
    CHECK(analytic.x2_m == doctest::Approx(numeric.x2).epsilon(1e-10));
    CHECK(analytic.x1_m > 0.0);
    CHECK(analytic.x2_m < 0.0);
    // Consistency of the ratio with the absolute positions.
    const auto reference = equilibrium_positions({nu1, kMass, 1.0}, {1.0, 1.0});
    CHECK(analytic.x1_m / reference.x1_m == doctest::Approx(displacement_ratio(eta, q2)).epsilon(1e-12));
  }
}

TEST_CASE("displacement ratio reference values") {
  CHECK(displacement_ratio(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  const auto ref = minimize_potential(474e3, 1.0, 1.0, 1.0, 3e-6, -3e-6);
  const auto brute = minimize_potential(474e3, 2.0, 1.0, 2.0, 3e-6, -3e-6);
  CHECK(std::abs(displacement_ratio(2.0, 2.0) - brute.x1 / ref.x1) <= 1e-3);
  CHECK(displacement_ratio(2.0, 2.0) == doctest::Approx(1.7235).epsilon(1e-4));
  CHECK(displacement_ratio(2.07, 2.0) >= 1.70);
  CHECK(displacement_ratio(2.07, 2.0) <= 1.78);
  // Same charge at eta = 1 leaves the ion where it was; doubling the charge alone
  // moves it out by 2^(1/3).
  CHECK(displacement_ratio(1.0, 2.0) == doctest::Approx(std::cbrt(2.0)));
  CHECK_THROWS_AS(displacement_ratio(0.0, 1.0), DomainError);
}

TEST_CASE("charge inference") {
  CHECK(infer_charge(1.74, 2.135) == doctest::Approx(1.96).epsilon(0.01 / 1.96));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double eta = 1.0 + 9.0 * u(rng), q2 = 0.2 + 3.0 * u(rng);
    CHECK(infer_charge(displacement_ratio(eta, q2), eta) == doctest::Approx(q2).epsilon(1e-12));
  }
  CHECK_THROWS_AS(infer_charge(-1.0, 2.0), DomainError);
}

TEST_CASE("mode frequencies") {
  const TrapAxis unit{474e3, kMass, 1.0};
  const auto m = normal_mode_frequencies(unit);
  CHECK(m.nu_com_hz == doctest::Approx(474e3).epsilon(1e-15));
  CHECK(m.nu_bre_hz == doctest::Approx(std::sqrt(3.0) * 474e3).epsilon(1e-15));

  SUBCASE("closed form agrees with the Hessian eigenvalues") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const double nu1 = 1e5 + 1e6 * u(rng), eta = 1.0 + 9.0 * u(rng), q2 = 0.5 + 2.5 * u(rng);
      const auto analytic = normal_mode_frequencies({nu1, kMass, eta});
      const auto [com, bre] = hessian_modes(nu1, eta, q2);
      CHECK(analytic.nu_com_hz == doctest::Approx(com).epsilon(1e-9));
      CHECK(analytic.nu_bre_hz == doctest::Approx(bre).epsilon(1e-9));
    }
  }
  SUBCASE("trace and determinant of the reduced stiffness") {
    for (double eta = 1.0; eta <= 10.0; eta += 0.37) {
      const double up = mode_eigenvalue(eta, Mode::bre), dn = mode_eigenvalue(eta, Mode::com);
      CHECK(up * dn == doctest::Approx(3.0 * eta * eta).epsilon(1e-13));
      CHECK(up + dn == doctest::Approx(1.0 + eta * eta + 4.0 / (1.0 + 1.0 / (eta * eta))).epsilon(1e-13));
    }
  }
  SUBCASE("mode at eta = 2.135") {
    const auto f = normal_mode_frequencies({474e3, kMass, 2.135});
    CHECK(f.nu_com_hz / 474e3 == doctest::Approx(std::sqrt(1.99955)).epsilon(1e-5));
  }
}

TEST_CASE("eta inversion round trip") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double eta = u(rng);
    const TrapAxis trap{474e3, kMass, eta};
    const auto f = normal_mode_frequencies(trap);
    CHECK(std::abs(infer_eta(f.nu_com_hz, trap.nu1_hz, Mode::com) - eta) <= 1e-6);
    CHECK(std::abs(infer_eta(f.nu_bre_hz, trap.nu1_hz, Mode::bre) - eta) <= 1e-6);
  }
  CHECK(infer_eta(474e3, 474e3, Mode::com) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(infer_eta(0.5 * 474e3, 474e3, Mode::com), doctest::Contains("outside"), DomainError);
  CHECK_THROWS_AS(infer_eta(100.0 * 474e3, 474e3, Mode::bre), DomainError);
  CHECK(parse_mode("breathe") == Mode::bre);
  CHECK_THROWS_AS(parse_mode("rocking"), DomainError);
}

TEST_CASE("trap validation") {
  CHECK_THROWS_AS(normal_mode_frequencies({0.0, kMass, 1.0}), DomainError);
  CHECK_THROWS_AS(equilibrium_positions({1e5, kMass, 1.0}, {1.0, 0.0}), DomainError);
}

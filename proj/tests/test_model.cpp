#include <doctest.h>

#include <cmath>
#include <numbers>

#include "autores/asymptotics.hpp"
#include "autores/lyapunov.hpp"
#include "autores/model.hpp"
#include "autores/noise.hpp"
#include "support.hpp"

using namespace autores;
using doctest::Approx;

TEST_SUITE("model") {
  TEST_CASE("system parameters validate their range") {
    CHECK_THROWS_AS(SystemParams(0.0, 0.1), DomainError);
    CHECK_THROWS_AS(SystemParams(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(SystemParams(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(SystemParams(-1.0, 0.5), DomainError);
    try {
      (void)SystemParams(1.0, 1.5);
    } catch (const DomainError& e) {
      CHECK(e.field() == "gamma");
    }
    for (double g : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
      const SystemParams p(2.0, g);
      CHECK(std::abs(p.nu() * p.nu() + g * g - 1.0) < 4e-16);
    }
  }

  TEST_CASE("noise schedule amplitude range") {
    CHECK_THROWS_AS(NoiseSchedule(0.0, Schedule::constant(0), Schedule::constant(1), 1), DomainError);
    CHECK_THROWS_AS(NoiseSchedule(1.0, Schedule::constant(0), Schedule::constant(1), 1), DomainError);
    CHECK_THROWS_AS(NoiseSchedule(0.5, Schedule::constant(0), Schedule::constant(1), 0), DomainError);
    const NoiseSchedule n(0.5, Schedule::constant(0), Schedule::power_law(2.0, -1.0), 1);
    CHECK(n.with_mu(0.0).mu() == 0.0);
    CHECK(n.sigma2()(4.0) == Approx(0.5));
  }

  TEST_CASE("primary right-hand side by direct evaluation") {
    const Vec2 f = rhs_primary({1.0, std::numbers::pi / 2}, 1.0, test::params());
    CHECK(f[0] == Approx(0.9).epsilon(1e-15));
    CHECK(std::abs(f[1]) < 1e-15);
    // The amplitude axis is invariant.
    for (double psi : {-3.0, 0.0, 1.0, 7.0}) {
      const Vec2 g = rhs_primary({0.0, psi}, 3.0, test::params());
      CHECK(g[0] == 0.0);
      CHECK(g[1] == Approx(-3.0 + std::cos(psi)));
    }
  }

  TEST_CASE("primary residual along the series vanishes at large tau") {
    const SystemParams& p = test::params();
    const AsymptoticExpansion e = expand(p, Branch::stable, 3);
    double prev = 1e9;
    for (double tau : {10.0, 100.0, 1000.0}) {
      const Vec2 res = residual(e, p, tau);
      const double norm = std::hypot(res[0], res[1]);
      CHECK(norm < prev);
      prev = norm;
    }
    CHECK(prev < 1e-7);
  }

  TEST_CASE("perturbed drift equals the primary field") {
    const NoiseSchedule n(0.3, Schedule::constant(0.2), Schedule::constant(1.0), 1.0);
    const Vec2 f = drift_perturbed({1.0, 0.0}, 2.0, test::params(), n);
    CHECK(f[0] == Approx(-0.1));
    CHECK(f[1] == Approx(0.0));
    NoiseStream rng(11, 0);
    for (int i = 0; i < 500; ++i) {
      const State s{10.0 * rng.next_uniform(), 20.0 * (rng.next_uniform() - 0.5)};
      const double tau = 100.0 * rng.next_uniform();
      const Vec2 a = rhs_primary(s, tau, test::params());
      const Vec2 b = drift_perturbed(s, tau, test::params(), n);
      CHECK(a[0] == b[0]);
      CHECK(a[1] == b[1]);
    }
  }

  TEST_CASE("diffusion matrix entries") {
    const NoiseSchedule fig(0.1, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
    for (double psi : {0.0, 1.0, 2.5}) {
      const Mat2 g = diffusion_matrix({3.0, psi}, 5.0, fig);
      CHECK(g[0][0] == 0.0);
      CHECK(g[0][1] == 0.0);
      CHECK(g[1][0] == 0.0);
      CHECK(g[1][1] == 1.0);
    }
    const NoiseSchedule one(0.1, Schedule::constant(1.0), Schedule::constant(0.0), 1.0);
    const Mat2 g = diffusion_matrix({2.0, std::numbers::pi / 2}, 1.0, one);
    CHECK(g[0][0] == Approx(2.0));
    CHECK(std::abs(g[1][0]) < 1e-15);
  }

  TEST_CASE("half covariance stays below h on the tube for the class schedule") {
    const NoiseSchedule n(0.1, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
    const double worst = max_half_covariance(n, *test::reference(), 0.1, 10.0, 1000.0);
    CHECK(worst == Approx(0.5));
    CHECK(worst <= n.h());
    const NoiseSchedule decaying(0.1, Schedule::power_law(0.5, -1.0), Schedule::constant(0.3), 1.0);
    CHECK(max_half_covariance(decaying, *test::reference(), 0.1, 10.0, 1000.0) <= 1.0);
  }

  TEST_CASE("Milstein term matches the directional derivative of the w1 column") {
    const NoiseSchedule n(0.1, Schedule::constant(0.7), Schedule::constant(1.0), 1.0);
    const State s{1.3, 0.4};
    const double tau = 2.0, h = 1e-6;
    const Mat2 g = diffusion_matrix(s, tau, n);
    Vec2 fd{};
    for (int comp = 0; comp < 2; ++comp) {
      State up = s, dn = s;
      (comp == 0 ? up.r : up.psi) += h;
      (comp == 0 ? dn.r : dn.psi) -= h;
      const Mat2 gu = diffusion_matrix(up, tau, n), gd = diffusion_matrix(dn, tau, n);
      for (int i = 0; i < 2; ++i) fd[i] += g[comp][0] * (gu[i][0] - gd[i][0]) / (2 * h);
    }
    const Vec2 m = milstein_w1_term(s, tau, n);
    CHECK(m[0] == Approx(fd[0]).epsilon(1e-7));
    CHECK(m[1] == Approx(fd[1]).epsilon(1e-7));
  }

  TEST_CASE("Hamiltonian vanishes with its gradient at the origin") {
    const auto ref = test::reference();
    for (double tau : {5.0, 10.0, 100.0, 1000.0}) {
      const HamiltonianJet j = hamiltonian_jet({0.0, 0.0}, tau, test::params(), *ref);
      CHECK(j.H == 0.0);
      CHECK(std::abs(j.dR) < 1e-14);
      CHECK(std::abs(j.dPsi) < 1e-12 * tau);
      CHECK(hamiltonian({0.0, 0.0}, tau, test::params(), *ref) == 0.0);
    }
  }

  TEST_CASE("Hamiltonian approaches nu tau Psi^2 / 2 + R^2 / 2") {
    const auto ref = test::reference();
    const SystemParams& p = test::params();
    double prev = 1.0;
    for (const auto& [d, tau] : {std::pair{0.1, 20.0}, {0.03, 100.0}, {0.01, 900.0}}) {
      double worst = 0.0;
      for (int k = 0; k < 16; ++k) {
        const double a = 2 * std::numbers::pi * k / 16;
        const ErrorState e{d * std::cos(a), d * std::sin(a)};
        const double lead = p.nu() * tau * e.Psi * e.Psi / 2 + e.R * e.R / 2;
        const double scale = p.nu() * tau * d * d / 2;
        worst = std::max(worst, std::abs(hamiltonian(e, tau, p, *ref) - lead) / scale);
      }
      CHECK(worst < prev);
      prev = worst;
    }
    CHECK(prev < 0.02);
  }

  TEST_CASE("closed-form partials match central differences") {
    const auto ref = test::reference();
    const SystemParams& p = test::params();
    NoiseStream rng(3, 1);
    for (int i = 0; i < 50; ++i) {
      const ErrorState e{0.4 * (rng.next_uniform() - 0.5), 0.4 * (rng.next_uniform() - 0.5)};
      const double tau = 20.0 + 500.0 * rng.next_uniform();
      const HamiltonianJet j = hamiltonian_jet(e, tau, p, *ref);
      const double h = 1e-5;
      auto H = [&](double R, double Psi, double t) { return hamiltonian({R, Psi}, t, p, *ref); };
      const double dR = (H(e.R + h, e.Psi, tau) - H(e.R - h, e.Psi, tau)) / (2 * h);
      const double dPsi = (H(e.R, e.Psi + h, tau) - H(e.R, e.Psi - h, tau)) / (2 * h);
      const double dRR = (H(e.R + h, e.Psi, tau) - 2 * H(e.R, e.Psi, tau) + H(e.R - h, e.Psi, tau)) / (h * h);
      const double ht = 1e-3;
      const double dtau = (H(e.R, e.Psi, tau + ht) - H(e.R, e.Psi, tau - ht)) / (2 * ht);
      const double scale = 1.0 + tau * std::hypot(e.R, e.Psi);
      CHECK(std::abs(j.dR - dR) < 1e-7 * scale);
      CHECK(std::abs(j.dPsi - dPsi) < 1e-7 * scale);
      CHECK(std::abs(j.dRR - dRR) < 1e-3);
      CHECK(std::abs(j.dtau - dtau) < 1e-5 * scale);
      const double dRP = (H(e.R + h, e.Psi + h, tau) - H(e.R + h, e.Psi - h, tau) -
                          H(e.R - h, e.Psi + h, tau) + H(e.R - h, e.Psi - h, tau)) / (4 * h * h);
      CHECK(std::abs(j.dRPsi - dRP) < 1e-3);
      const double dPP = (H(e.R, e.Psi + h, tau) - 2 * H(e.R, e.Psi, tau) + H(e.R, e.Psi - h, tau)) / (h * h);
      CHECK(std::abs(j.dPsiPsi - dPP) < 1e-3 * tau);
    }
  }

  TEST_CASE("error field: origin is an equilibrium and the change of variables holds") {
    const auto ref = test::reference();
    const SystemParams& p = test::params();
    for (double tau : {10.0, 300.0}) {
      const Vec2 z = rhs_error({0, 0}, tau, p, *ref);
      CHECK(std::abs(z[0]) < 1e-12 * tau);
      CHECK(std::abs(z[1]) < 1e-12);
    }
    NoiseStream rng(5, 2);
    for (int i = 0; i < 200; ++i) {
      const ErrorState e{rng.next_uniform() - 0.5, rng.next_uniform() - 0.5};
      const double tau = 6.0 + 900.0 * rng.next_uniform();
      const State s = ref->at(tau);
      const Vec2 full = rhs_primary({s.r + e.R, s.psi + e.Psi}, tau, p);
      const Vec2 star = ref->derivative(tau);
      const Vec2 err = rhs_error(e, tau, p, *ref);
      CHECK(err[0] == Approx(full[0] - star[0]).epsilon(1e-9).scale(tau));
      CHECK(err[1] == Approx(full[1] - star[1]).epsilon(1e-9).scale(tau));
    }
  }

  TEST_CASE("Hamiltonian needs tau inside the reference domain") {
    CHECK_THROWS_AS((void)hamiltonian({0.1, 0.1}, 1.0, test::params(), *test::reference()), DomainError);
  }
}

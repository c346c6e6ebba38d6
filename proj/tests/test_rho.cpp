#include "doctest.h"

#include <cmath>
#include <vector>

#include "sbreak/errors.hpp"
#include "sbreak/rho.hpp"

using namespace sbreak;

// Oracle values below were frozen from a 50-digit arbitrary-precision
// computation of the same closed forms.

TEST_CASE("loss function closed-form values") {
    const RhoKernel k{2.0};
    CHECK(k.rho(0.0) == 0.0);
    CHECK(k.rho(2.0) == 1.0);
    CHECK(k.rho(-2.0) == 1.0);
    CHECK(k.rho(5.0) == 1.0);
    // u = 1/2: 1 - (3/4)^3 = 37/64, exact in binary arithmetic
    CHECK(k.rho(1.0) == 0.578125);
    CHECK(k.rho(-1.0) == 0.578125);

    // same identities at the default tuning constant
    const RhoKernel d = default_kernel();
    CHECK(d.rho(0.0) == 0.0);
    CHECK(d.rho(d.c) == 1.0);
    CHECK(d.rho(0.5 * d.c) == 0.578125);
}

TEST_CASE("loss is even and nondecreasing in |x|") {
    const RhoKernel k = default_kernel();
    double prev = -1.0;
    for (int i = 0; i <= 400; ++i) {
        const double x = 2.0 * k.c * i / 400.0;
        CHECK(k.rho(x) == k.rho(-x));
        CHECK(k.rho(x) >= prev);
        prev = k.rho(x);
    }
}

TEST_CASE("score chain matches finite differences") {
    const RhoKernel k = default_kernel();
    const double h = 1e-5;
    // grid over [-1.5c, 1.5c], keeping the FD stencil away from the |x| = c
    // kink where the second derivative of psi jumps
    for (int i = 0; i <= 300; ++i) {
        const double x = -1.5 * k.c + 3.0 * k.c * i / 300.0;
        if (std::abs(std::abs(x) - k.c) < 1e-3) continue;
        const double fd_psi = (k.rho(x + h) - k.rho(x - h)) / (2.0 * h);
        const double fd_psi_p = (k.psi(x + h) - k.psi(x - h)) / (2.0 * h);
        const double fd_psi_pp = (k.psi_prime(x + h) - k.psi_prime(x - h)) / (2.0 * h);
        CHECK(std::abs(fd_psi - k.psi(x)) <= 1e-6 * std::max(1.0, std::abs(k.psi(x))));
        CHECK(std::abs(fd_psi_p - k.psi_prime(x)) <=
              1e-6 * std::max(1.0, std::abs(k.psi_prime(x))));
        CHECK(std::abs(fd_psi_pp - k.psi_second(x)) <=
              1e-6 * std::max(1.0, std::abs(k.psi_second(x))));
    }
}

TEST_CASE("score redescends and the weight removes the division") {
    const RhoKernel k = default_kernel();
    CHECK(k.psi(k.c) == 0.0);
    CHECK(k.psi(1.5 * k.c) == 0.0);
    CHECK(k.psi(0.5 * k.c) > 0.0);
    CHECK(k.psi(-0.5 * k.c) < 0.0);
    // weight(x) * x == psi(x), with weight(0) = psi'(0) by continuity
    CHECK(k.weight(0.0) == k.psi_prime(0.0));
    for (double x : {0.1, 0.7, 1.2, -0.4, 2.0}) {
        CHECK(k.weight(x) * x == doctest::Approx(k.psi(x)).epsilon(1e-15));
    }
}

TEST_CASE("consistency constant") {
    CHECK(std::abs(RhoKernel{1.0}.consistency_constant() - 0.6542185486372468) < 1e-11);
    CHECK(std::abs(RhoKernel{2.0}.consistency_constant() - 0.3975633089589684) < 1e-11);
    // decreasing in c
    CHECK(RhoKernel{1.0}.consistency_constant() > RhoKernel{1.5}.consistency_constant());
    CHECK(RhoKernel{1.5}.consistency_constant() > RhoKernel{2.0}.consistency_constant());
}

TEST_CASE("default tuning constant hits K = 1/2") {
    const double c = default_tuning_constant();
    CHECK(std::abs(c - 1.5476449809282259) < 1e-12);
    CHECK(std::abs(RhoKernel{c}.consistency_constant() - 0.5) < 1e-12);
    // the 50% breakdown identity: rho crosses 1/2 at c * sqrt(1 - cbrt(1/2))
    CHECK(RhoKernel{c}.rho(c * 0.4542020189474066) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("quadrature rule integrates exactly") {
    const GaussHermiteRule& rule = gauss_hermite(20);
    double w = 0.0;
    for (double wi : rule.weights) w += wi;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
    // standard normal moments: 1, 0, 1, 0, 3, 0, 15
    CHECK(std::abs(normal_expectation([](double z) { return z; }, 20)) < 1e-13);
    CHECK(normal_expectation([](double z) { return z * z; }, 20) ==
          doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(normal_expectation([](double z) { return z * z * z; }, 20)) < 1e-12);
    CHECK(normal_expectation([](double z) { return std::pow(z, 4); }, 20) ==
          doctest::Approx(3.0).epsilon(1e-13));
    CHECK(normal_expectation([](double z) { return std::pow(z, 6); }, 20) ==
          doctest::Approx(15.0).epsilon(1e-13));
    CHECK_THROWS_AS(gauss_hermite(1), std::invalid_argument);
}

TEST_CASE("orthogonal polynomial recurrence") {
    // He_2 = x^2 - 1, He_3 = x^3 - 3x
    CHECK(hermite_poly(0, 1.7) == 1.0);
    CHECK(hermite_poly(1, 1.7) == 1.7);
    CHECK(hermite_poly(2, 1.7) == doctest::Approx(1.7 * 1.7 - 1.0).epsilon(1e-15));
    CHECK(hermite_poly(3, 1.7) == doctest::Approx(1.7 * 1.7 * 1.7 - 3 * 1.7).epsilon(1e-15));

    // E[He_p He_q] = q! on the diagonal, 0 off it
    double fact = 1.0;
    for (int q = 1; q <= 6; ++q) {
        fact *= q;
        for (int p = 1; p <= 6; ++p) {
            const double ip = normal_expectation(
                [&](double z) { return hermite_poly(p, z) * hermite_poly(q, z); }, 64);
            if (p == q)
                CHECK(ip == doctest::Approx(fact).epsilon(1e-12));
            else
                CHECK(std::abs(ip) < 1e-9 * fact);
        }
    }
}

TEST_CASE("centered loss has rank two") {
    const HermiteAnalysis h = hermite_coeffs(default_kernel(), 8);
    REQUIRE(h.coeffs.size() == 8);
    CHECK(h.rank == 2);
    // odd coefficients vanish by symmetry
    CHECK(std::abs(h.coeffs[0]) < 1e-10);
    CHECK(std::abs(h.coeffs[2]) < 1e-10);
    CHECK(std::abs(h.coeffs[4]) < 1e-10);
    CHECK(std::abs(h.coeffs[6]) < 1e-10);
    CHECK(h.coeffs[1] == doctest::Approx(0.3893481518998587).epsilon(1e-9));
    CHECK(h.coeffs[3] == doctest::Approx(-0.8993869091936358).epsilon(1e-9));
    CHECK(h.coeffs[5] == doctest::Approx(3.417348721855727).epsilon(1e-9));
    CHECK(h.coeffs[7] == doctest::Approx(-17.89536200033429).epsilon(1e-9));
}

TEST_CASE("generic expansion utilities") {
    // an odd test function has rank 3 when its linear coefficient is removed
    const HermiteAnalysis h = hermite_coeffs_of(
        [](double z) { return z * z * z - 3.0 * z; }, 4);
    CHECK(h.rank == 3);
    CHECK(h.coeffs[2] == doctest::Approx(6.0).epsilon(1e-10));  // E[He_3^2] = 3!

    // a constant has no expansion terms at all
    CHECK_THROWS_AS(hermite_coeffs_of([](double) { return 0.0; }, 6), RankNotFoundError);
    CHECK_THROWS_AS(hermite_coeffs(default_kernel(), 0), std::invalid_argument);
}

TEST_CASE("convergence exponent") {
    // min(alpha q1 / 2, min_i (theta_i + alpha)/2)
    const std::vector<double> two = {0.4, 0.6};
    CHECK(rate_constant(0.8, two, 2) == doctest::Approx(0.6).epsilon(1e-15));
    const std::vector<double> one = {0.4};
    CHECK(rate_constant(0.4, one, 2) == 0.4);  // alpha = theta case collapses to alpha
    const std::vector<double> none;
    CHECK(rate_constant(0.5, none, 2) == 0.5);
    CHECK(rate_constant(0.5, none, 3) == 0.75);
    CHECK_THROWS_AS(rate_constant(1.2, one, 2), std::invalid_argument);
    CHECK_THROWS_AS(rate_constant(0.4, std::vector<double>{1.5}, 2), std::invalid_argument);
    CHECK_THROWS_AS(rate_constant(0.4, one, 0), std::invalid_argument);
}

#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sbreak/mscale.hpp"
#include "sbreak/rng.hpp"

using namespace sbreak;

namespace {

std::vector<double> random_residuals(int n, std::uint64_t tag) {
    RngStream r(tag, "mscale-test");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (double& x : out) x = r.normal();
    return out;
}

}  // namespace

TEST_CASE("constant residuals have a closed-form scale") {
    // all residuals equal a: rho(a/s) = K = 1/2, so s = a / (c sqrt(1 - cbrt(1/2)))
    const RhoKernel k = default_kernel();
    const std::vector<double> r(10, 3.7);
    const ScaleSolution sol = solve_scale(r, k, 0.5);
    REQUIRE(sol.status == ScaleStatus::Ok);
    const double expected = 3.7 / (k.c * 0.4542020189474066);
    CHECK(std::abs(sol.s - expected) <= 1e-10 * expected);
}

TEST_CASE("solution certificate holds") {
    const RhoKernel k = default_kernel();
    for (std::uint64_t tag = 0; tag < 20; ++tag) {
        const std::vector<double> r = random_residuals(5 + 7 * static_cast<int>(tag), tag);
        const ScaleSolution sol = solve_scale(r, k, 0.5);
        REQUIRE(sol.status == ScaleStatus::Ok);
        CHECK(std::abs(sol.g_at_s - 0.5) <= 1e-12 * 0.5);
        // supremum root: the defining average strictly drops past s
        double above = 0.0, below = 0.0;
        for (double x : r) {
            above += k.rho(x / (sol.s * 1.001));
            below += k.rho(x / (sol.s * 0.999));
        }
        CHECK(above / static_cast<double>(r.size()) <= 0.5 + 1e-9);
        CHECK(below / static_cast<double>(r.size()) >= 0.5 - 1e-9);
    }
}

TEST_CASE("scale equivariance") {
    const RhoKernel k = default_kernel();
    for (std::uint64_t tag = 0; tag < 100; ++tag) {
        const std::vector<double> r = random_residuals(5 + static_cast<int>(tag % 40), 100 + tag);
        const double s0 = solve_scale(r, k, 0.5).s;
        for (double lam : {1e-3, 1e3}) {
            std::vector<double> scaled = r;
            for (double& x : scaled) x *= lam;
            const double s1 = solve_scale(scaled, k, 0.5).s;
            CHECK(std::abs(s1 - lam * s0) <= 1e-11 * lam * s0);
        }
    }
}

TEST_CASE("warm starts land on the cold answer") {
    const RhoKernel k = default_kernel();
    const std::vector<double> r = random_residuals(200, 55);
    const double cold = solve_scale(r, k, 0.5).s;
    for (double f : {0.25, 0.9, 1.0, 1.1, 4.0}) {
        const ScaleSolution warm = solve_scale(r, k, 0.5, f * cold);
        REQUIRE(warm.status == ScaleStatus::Ok);
        CHECK(std::abs(warm.s - cold) <= 1e-12 * cold);
    }
}

TEST_CASE("Fisher consistency at the default constant") {
    // K = 1/2 makes the scale estimate consistent for the normal sd
    RngStream rng(7, "fisher");
    const double sigma = 2.0;
    std::vector<double> r(20000);
    for (double& x : r) x = sigma * rng.normal();
    const ScaleSolution sol = solve_scale(r, default_kernel(), 0.5);
    REQUIRE(sol.status == ScaleStatus::Ok);
    CHECK(std::abs(sol.s - sigma) / sigma < 0.03);
}

TEST_CASE("degenerate inputs") {
    const RhoKernel k = default_kernel();

    const std::vector<double> zeros(12, 0.0);
    CHECK(solve_scale(zeros, k, 0.5).status == ScaleStatus::AllZeroResiduals);

    // n = 10, K = 1/2: four nonzero values cannot push the average up to K
    // for any positive s, only in the s -> 0 limit
    std::vector<double> sparse(10, 0.0);
    for (int i = 0; i < 4; ++i) sparse[static_cast<std::size_t>(i)] = i + 1.0;
    CHECK(solve_scale(sparse, k, 0.5).status == ScaleStatus::NoSolution);

    // exactly K n nonzero: g is flat at K on (0, min|r|/c], and the supremum
    // root is the end of that plateau
    sparse[4] = 5.0;
    const ScaleSolution five = solve_scale(sparse, k, 0.5);
    CHECK(five.status == ScaleStatus::Ok);
    CHECK(five.s == 1.0 / k.c);  // min nonzero |r| is 1
    CHECK(five.g_at_s == 0.5);

    sparse[5] = 6.0;  // past the boundary an ordinary interior root exists
    const ScaleSolution six = solve_scale(sparse, k, 0.5);
    CHECK(six.status == ScaleStatus::Ok);
    CHECK(six.s > 1.0 / k.c);

    CHECK_THROWS_AS(solve_scale(std::vector<double>{}, k, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(solve_scale(sparse, k, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_scale(sparse, k, 1.0), std::invalid_argument);
}

TEST_CASE("scale-equation denominator diagnostic") {
    const RhoKernel k = default_kernel();
    const std::vector<double> r = random_residuals(100, 9);
    const ScaleSolution sol = solve_scale(r, k, 0.5);
    REQUIRE(sol.status == ScaleStatus::Ok);
    // positive at the root (mass strictly inside (0, c))
    CHECK(dn_diagnostic(r, sol.s, k) > 0.0);
    // all residuals far beyond the cutoff: x psi(x) = 0 everywhere
    CHECK(dn_diagnostic(r, sol.s * 1e-6, k) == 0.0);
}

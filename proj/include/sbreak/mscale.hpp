#pragma once

#include <span>

#include "sbreak/rho.hpp"

namespace sbreak {

enum class ScaleStatus {
    Ok,
    // Fewer than K*n residuals are nonzero, so g(s) < K for every s > 0 and
    // the equation has no positive root.  Callers treat this as an exact-fit
    // candidate with scale 0+, which ranks ahead of any positive scale.
    NoSolution,
    AllZeroResiduals,
};

struct ScaleSolution {
    ScaleStatus status = ScaleStatus::Ok;
    double s = 0.0;
    double g_at_s = 0.0;   // (1/n) sum rho(r_t/s) at the returned s
    int iterations = 0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

// Solves (1/n) sum_t rho(r_t/s) = K for s > 0.
//
// g is nonincreasing in s, so the root set is an interval; the returned value
// is its supremum, located by bisection on the predicate g(s) >= K with a
// safeguarded secant acceleration, then polished by Newton steps inside the
// final bracket.  |g(s) - K| <= 1e-12 * K at the result.
// warm_s, when positive, seeds the initial bracket.
ScaleSolution solve_scale(std::span<const double> residuals, const RhoKernel& kernel,
                          double K, double warm_s = 0.0);

// D = (1/n) sum_t (r_t/s) psi(r_t/s); positive when scaled residuals have
// mass inside (0, c), zero when all of them sit at 0 or beyond +-c.
double dn_diagnostic(std::span<const double> residuals, double s, const RhoKernel& kernel);

}

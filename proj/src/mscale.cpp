#include "sbreak/mscale.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sbreak {

namespace {

constexpr double kCertify = 1e-13;   // |g - K| <= kCertify*K at the returned root
constexpr double kWidthTol = 1e-13;  // fallback: relative bracket width
constexpr double kMadZ = 0.6744897501960817;  // Phi^{-1}(3/4)

// Mean of rho(r_t/s). The cap at |u| >= 1 is a clamp, so the loop stays
// branch-free and autovectorizes.
double g_of_s(std::span<const double> r, double s, const RhoKernel& k) {
    const double inv = 1.0 / (k.c * s);
    double acc = 0.0;
    for (double v : r) {
        const double u = v * inv;
        double t = 1.0 - u * u;
        t = t > 0.0 ? t : 0.0;
        acc += 1.0 - t * t * t;
    }
    return acc / static_cast<double>(r.size());
}

}  // namespace

double dn_diagnostic(std::span<const double> residuals, double s, const RhoKernel& kernel) {
    const double inv = 1.0 / (kernel.c * s);
    double acc = 0.0;
    for (double v : residuals) {
        const double u = v * inv;
        double t = 1.0 - u * u;
        t = t > 0.0 ? t : 0.0;
        acc += 6.0 * u * u * t * t;
    }
    return acc / static_cast<double>(residuals.size());
}

// Solves (1/n) sum rho(r_t/s) = K for the supremum root s > 0.
//
// g(s) is continuous, tends to (#nonzero)/n as s -> 0+ and to 0 as s -> inf,
// and is strictly decreasing wherever some residual sits inside the ramp
// |r| < c*s. The root is bracketed from a robust start (normalized MAD, or
// the caller's warm value), then polished by bracket-safeguarded Newton using
// g'(s) = -D(s)/s. Plateaus at level K cannot occur once the nonzero-count
// guard below has passed, so the Newton certificate |g-K| <= 1e-13*K is
// reachable; a pure-bisection fallback covers adversarial inputs anyway.
ScaleSolution solve_scale(std::span<const double> residuals, const RhoKernel& kernel, double K,
                          double warm_s) {
    const std::size_t n = residuals.size();
    if (n == 0) throw std::invalid_argument("solve_scale: empty residual vector");
    if (!(K > 0.0) || !(K < 1.0)) throw std::invalid_argument("solve_scale: K must be in (0,1)");

    ScaleSolution out;
    std::size_t nonzero = 0;
    double max_abs = 0.0;
    double sum_abs = 0.0;
    for (double v : residuals) {
        const double a = std::abs(v);
        if (a > 0.0) ++nonzero;
        max_abs = std::max(max_abs, a);
        sum_abs += a;
    }
    if (nonzero == 0) {
        out.status = ScaleStatus::AllZeroResiduals;
        return out;
    }
    // Exact-fit degeneracy: with fewer than K*n nonzero residuals,
    // sup_s g(s) = (#nonzero)/n < K and the equation has no positive root;
    // callers rank this as an s -> 0+ candidate.
    const double kn = K * static_cast<double>(n);
    if (static_cast<double>(nonzero) < kn) {
        out.status = ScaleStatus::NoSolution;
        return out;
    }
    // At exact equality g sits flat at K on (0, min nonzero |r| / c]; the
    // supremum root is the right end of that plateau, in closed form.
    if (static_cast<double>(nonzero) == kn) {
        double min_abs = max_abs;
        for (double v : residuals) {
            const double a = std::abs(v);
            if (a > 0.0 && a < min_abs) min_abs = a;
        }
        out.status = ScaleStatus::Ok;
        out.s = min_abs / kernel.c;
        out.g_at_s = static_cast<double>(nonzero) / static_cast<double>(n);
        out.bracket_lo = 0.0;
        out.bracket_hi = out.s;
        return out;
    }

    double s0 = warm_s;
    if (!(s0 > 0.0) || !std::isfinite(s0)) {
        std::vector<double> tmp(residuals.begin(), residuals.end());
        for (double& v : tmp) v = std::abs(v);
        auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
        std::nth_element(tmp.begin(), mid, tmp.end());
        s0 = *mid / kMadZ;
        if (!(s0 > 0.0)) s0 = sum_abs / static_cast<double>(nonzero) / kMadZ;
    }

    int evals = 0;
    auto g = [&](double s) {
        ++evals;
        return g_of_s(residuals, s, kernel);
    };

    // Bracket [lo, hi] with g(lo) >= K > g(hi).
    double lo, hi, g_lo, g_hi;
    double gs0 = g(s0);
    if (gs0 >= K) {
        lo = s0;
        g_lo = gs0;
        hi = s0;
        do {
            hi *= 2.0;
            g_hi = g(hi);
            if (evals > 2200) throw std::runtime_error("solve_scale: bracket expansion failed");
        } while (g_hi >= K);
    } else {
        hi = s0;
        g_hi = gs0;
        lo = s0;
        do {
            lo *= 0.5;
            g_lo = g(lo);
            if (evals > 2200) throw std::runtime_error("solve_scale: bracket expansion failed");
        } while (g_lo < K);
    }

    // Cold starts get a plain bisection run-in so Newton opens near the root;
    // a warm bracket is already one octave wide and skips straight to Newton.
    const bool warm = warm_s > 0.0 && std::isfinite(warm_s);
    if (!warm) {
        while ((hi - lo) > 1e-6 * hi) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if (gm >= K) {
                lo = mid;
                g_lo = gm;
            } else {
                hi = mid;
                g_hi = gm;
            }
        }
    }

    // Bracket-safeguarded Newton on h(s) = g(s) - K with g'(s) = -D(s)/s.
    double x = warm ? std::clamp(s0, lo, hi) : lo;
    double gx = warm ? (gs0 >= K ? g_lo : g_hi) : g_lo;
    if (warm && x != s0) gx = g(x);
    for (int it = 0; it < 60; ++it) {
        if (std::abs(gx - K) <= kCertify * K) {
            out.status = ScaleStatus::Ok;
            out.s = x;
            out.g_at_s = gx;
            out.iterations = evals;
            out.bracket_lo = lo;
            out.bracket_hi = hi;
            return out;
        }
        if (gx >= K) lo = x; else hi = x;
        if ((hi - lo) <= 1e-15 * hi) break;
        const double d = dn_diagnostic(residuals, x, kernel);
        double next;
        if (d > 1e-300) {
            next = x + (gx - K) * x / d;
            if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        } else {
            next = 0.5 * (lo + hi);
        }
        x = next;
        gx = g(x);
    }

    // Fallback: pure bisection to relative width 1e-13, returning the lower
    // (supremum-side) edge.
    while ((hi - lo) > kWidthTol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) >= K) lo = mid; else hi = mid;
        if (evals > 2200) break;
    }
    out.status = ScaleStatus::Ok;
    out.s = lo;
    out.g_at_s = g_of_s(residuals, lo, kernel);
    out.iterations = evals;
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    return out;
}

}  // namespace sbreak

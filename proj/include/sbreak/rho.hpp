#pragma once

#include <functional>
#include <span>
#include <vector>

namespace sbreak {

// Smooth bounded loss in biweight form, normalised so rho(0)=0 and rho=1
// outside [-c,c].  With u = x/c and t = max(0, 1-u^2):
//   rho(x) = 3u^2 - 3u^4 + u^6 = 1 - t^3
// On (-c,c): psi = rho' > 0 for x > 0, psi'' bounded, psi(x)/x nonincreasing
// in |x|.  x*psi(x) > 0 away from 0 and vanishes at 0 and beyond +-c.
struct RhoKernel {
    double c;

    double rho(double x) const {
        const double u = x / c;
        const double t = 1.0 - u * u;
        if (t <= 0.0) return 1.0;
        return 1.0 - t * t * t;
    }

    double psi(double x) const {
        const double u = x / c;
        const double t = 1.0 - u * u;
        if (t <= 0.0) return 0.0;
        return (6.0 / c) * u * t * t;
    }

    double psi_prime(double x) const {
        const double u = x / c;
        const double u2 = u * u;
        if (u2 >= 1.0) return 0.0;
        return (6.0 / (c * c)) * (1.0 - u2) * (1.0 - 5.0 * u2);
    }

    double psi_second(double x) const {
        const double u = x / c;
        const double u2 = u * u;
        if (u2 >= 1.0) return 0.0;
        return (24.0 / (c * c * c)) * u * (5.0 * u2 - 3.0);
    }

    // psi(x)/x extended by continuity: psi'(0) = 6/c^2 at x = 0.
    // This is the IRLS weight function; no division by x is ever needed.
    double weight(double x) const {
        const double u = x / c;
        const double t = 1.0 - u * u;
        if (t <= 0.0) return 0.0;
        return (6.0 / (c * c)) * t * t;
    }

    // K = E rho(Z), Z standard normal.  Gauss-Hermite on the polynomial
    // branch plus a closed-form correction for the saturated region, exact to
    // rounding; see the implementation note.
    double consistency_constant() const;
};

// Nodes/weights for E[f(Z)] ~ sum w_i f(x_i), Z standard normal.
// Golub-Welsch on the probabilists' Hermite recurrence; cached per size.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussHermiteRule& gauss_hermite(int n);

double normal_expectation(const std::function<double(double)>& f, int n = 200);

// Probabilists' Hermite polynomial He_q(x): He_0=1, He_1=x,
// He_{q+1} = x He_q - q He_{q-1}.
double hermite_poly(int q, double x);

// Tuning constant with E rho(Z) = 1/2 (the 50% breakdown choice); cached.
double default_tuning_constant();
RhoKernel default_kernel();

// Hermite expansion of chi = rho(.) - K.  coeffs[q-1] = E[chi(Z) He_q(Z)]
// for q = 1..q_max; rank = smallest q with |J_q| > threshold.
// Throws RankNotFoundError when every coefficient is below the threshold.
struct HermiteAnalysis {
    std::vector<double> coeffs;
    int rank;
};
HermiteAnalysis hermite_coeffs(const RhoKernel& kernel, int q_max,
                               double threshold = 1e-8);
HermiteAnalysis hermite_coeffs_of(const std::function<double(double)>& chi,
                                  int q_max, double threshold = 1e-8);

// Convergence-rate exponent k = min( alpha*q1/2, min_i (theta_i+alpha)/2 ).
// alpha is the error-memory exponent, thetas the regressor-memory exponents,
// q1 the Hermite rank of rho - K.
double rate_constant(double alpha, std::span<const double> thetas, int q1);

}

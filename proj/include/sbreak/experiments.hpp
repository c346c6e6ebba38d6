#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbreak/estimator.hpp"
#include "sbreak/procgen.hpp"

namespace sbreak {

// One (sample size, metric) cell of a Monte Carlo error table.
struct RateCell {
    int n = 0;
    std::string metric;  // "beta1", "beta2", "beta", "sigma", "pi"
    double median = 0.0;
    double mean = 0.0;
    double stderr_mean = 0.0;  // MC standard error of the mean (0 when replicates == 1)
    int replicates = 0;
};

// Least-squares fit of log(summary error) against log(n) for one metric.
// `basis` records which summary fed the fit. A slope is `valid` only when at
// least four sample sizes are present and every summary value is positive;
// exact-recovery zeros (routine for the change point at large n) invalidate
// the median basis, and reports then fall back to the mean basis.
struct SlopeFit {
    std::string metric;
    std::string basis;  // "median" or "mean"
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    bool valid = false;
    std::string reason;  // empty when valid
};

// Replicate r at sample size n draws everything from the derived stream
// (seed, n, r), so results are identical for any thread count. Worker
// parallelism lives at the replicate level; inner fits always run
// single-threaded.
struct RateStudySpec {
    ModelSpec model;
    FitConfig fit;
    std::vector<int> ns;
    int replicates = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct RateReport {
    std::vector<RateCell> cells;    // grouped by n, metrics in fixed order
    std::vector<SlopeFit> slopes;   // median and mean basis for beta, sigma, pi
    int hermite_rank = 0;           // q1 of rho(.) - K
    double rate_constant = 0.0;     // k = min(alpha*q1/2, min_i (theta_i+alpha)/2)
    double beta_slope_target = 0.0; // -k
    double pi_slope_target = 0.0;   // -(1+k)
    bool ordering_ok = false;       // pi slope <= beta slope - 1/2 on preferred bases
    bool underpowered = false;      // too few replicates or sample sizes for rate checks
};

struct RobustnessSpec {
    ModelSpec model;
    FitConfig fit;
    int n = 1000;
    int replicates = 50;
    std::uint64_t seed = 0;
    int threads = 1;
    double fraction = 0.1;     // contaminated share of responses, in [0, 0.3]
    double magnitude = 100.0;  // shift added (random sign) to each hit response
};

// Coefficient errors of one estimator arm, max over the two segments of
// ||bhat_j - beta_j||.
struct RobustnessArm {
    std::string name;  // "s_clean", "s_contaminated", "ls_clean", "ls_contaminated"
    double median = 0.0;
    double mean = 0.0;
    double stderr_mean = 0.0;
};

struct RobustnessReport {
    std::vector<RobustnessArm> arms;      // fixed order as listed above
    double ls_over_s_contaminated = 0.0;  // median LS / median S on contaminated data
    double s_cont_over_clean = 0.0;       // median S contaminated / median S clean
};

RateReport run_rate_study(const RateStudySpec& spec);

RobustnessReport run_robustness_study(const RobustnessSpec& spec);

// True iff the change-point slope beats the coefficient slope by at least 1/2,
// the desk-scale signature of the extra n^{-1} factor in its convergence rate.
bool ordering_check(double beta_slope, double pi_slope);

// Slope entry for `metric` on the preferred basis: median when valid, else
// mean. Returns nullptr when neither basis produced a usable fit.
const SlopeFit* preferred_slope(const RateReport& report, const std::string& metric);

}  // namespace sbreak

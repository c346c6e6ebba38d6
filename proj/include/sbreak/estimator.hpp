#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "sbreak/mscale.hpp"
#include "sbreak/procgen.hpp"
#include "sbreak/rho.hpp"

namespace sbreak {

struct FitConfig {
    double c = 0.0;             // tuning constant; <= 0 selects the K=1/2 default
    double trim = 0.1;          // minimum admissible segment fraction
    int n_subsets = 50;         // random exact-fit starts per segment
    int irls_max_iter = 200;
    double irls_tol = 1e-10;    // relative joint-scale change at convergence
    std::uint64_t seed = 0;     // stream seed for subset draws
    int threads = 1;            // candidate-chunk parallelism
    double box_halfwidth = 1e6; // estimates outside this box are flagged, not clamped
    int chunk = 256;            // candidates per warm-start chain

    RhoKernel resolved_kernel() const {
        return RhoKernel{c > 0.0 ? c : default_tuning_constant()};
    }
};

// Two-segment S-fit at a fixed split.  s is the joint M-scale of the pooled
// residuals; exact_fit marks the interpolation case (too few nonzero
// residuals for the scale equation), which ranks ahead of any positive s.
struct SplitFit {
    Eigen::VectorXd beta1;
    Eigen::VectorXd beta2;
    double s = 0.0;
    bool exact_fit = false;
    bool valid = false;
    bool converged = false;
    int iterations = 0;
};

struct FitDiagnostics {
    double dn = 0.0;              // (1/n) sum (r/s) psi(r/s) at the optimum
    double eq_b_norm = 0.0;       // ||(1/n) sum_{t<=k} psi(r_t/s) x_t||
    double eq_c_norm = 0.0;       // same over the second segment
    double gradient_fd_abs_error = 0.0;  // closed-form vs FD scale gradient
    bool out_of_box = false;
};

struct FitResult {
    Eigen::VectorXd beta1;
    Eigen::VectorXd beta2;
    int k_hat = 0;
    double pi_hat = 0.0;
    double sigma_hat = 0.0;
    int k_min = 0;                    // first admissible split
    std::vector<double> profile;      // joint scale at k_min, k_min+1, ...
    std::vector<int> iterations;      // IRLS iterations per candidate
    FitDiagnostics diagnostics;
    const char* method = "s";
};

// S-fit of both segments at split k (first segment is t = 1..k, 1-based):
// best of n_subsets random exact-fit d-point starts per segment, each
// refined by two IRLS steps, then full IRLS with step halving on the joint
// scale.  Accepted iterations never increase s.
SplitFit fit_segments(const Dataset& ds, int k, const FitConfig& cfg);

// Profile search over every admissible split
//   k in [max(d+2, ceil(trim*n)), n - max(d+2, ceil(trim*n))],
// warm-starting each candidate from its predecessor; subset search re-runs at
// chunk starts and wherever the warm chain stalls.  Ties in the profile
// minimum resolve to the smallest k.  Throws DegenerateSegmentError when no
// candidate admits a valid fit.
FitResult profile_changepoint(const Dataset& ds, const FitConfig& cfg);

// Derivative of the joint M-scale in the segment coefficients at fixed split:
//   ds/dbeta1 = -(1/n) D^{-1} sum_{t<=k} psi(r_t/s) x_t
// (implicit-function derivative of the scale equation; the returned D is the
// dn_diagnostic over all n points).  Defined wherever D > 0.
struct ScaleGradient {
    Eigen::VectorXd wrt_beta1;
    Eigen::VectorXd wrt_beta2;
    double dn = 0.0;
};
ScaleGradient scale_gradient(const Dataset& ds, int k, const Eigen::VectorXd& beta1,
                             const Eigen::VectorXd& beta2, double s, const RhoKernel& kernel);

// Least-squares baseline under the identical split profiling and trimming;
// scale is the pooled RMS residual.  Used as the comparison arm in
// robustness experiments.
FitResult ls_baseline_fit(const Dataset& ds, const FitConfig& cfg);

}

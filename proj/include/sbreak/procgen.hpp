#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sbreak/rng.hpp"

namespace sbreak {

enum class ErrorKernel { Fgn, PowerLaw };
enum class SlowlyVarying { One, LogShift };

// Stationary zero-mean Gaussian noise with long memory.
//  Fgn:      gamma(t) = sigma0^2 * ((t+1)^{2H} - 2 t^{2H} + (t-1)^{2H}) / 2,
//            H = 1 - alpha/2.  Always a valid covariance; gamma(t) decays
//            like const * t^{-alpha}.  Default.
//  PowerLaw: gamma(0) = sigma0^2, gamma(t) = sigma0^2 * t^{-alpha} * L(t).
//            Literal power law; validity is checked at generation time (the
//            sequence equals gamma(0) at lag 1, which no nondegenerate
//            process can realise for n >= 3; see gen_scalar_lrd).
// L is 1 or log(e+t)/log(e+1), normalised so L(1) = 1.
struct ErrorLawSpec {
    double alpha = 0.4;
    double sigma0 = 1.0;
    ErrorKernel kernel = ErrorKernel::Fgn;
    SlowlyVarying slowly_varying = SlowlyVarying::One;

    void validate() const;
};

// d-dimensional stationary Gaussian regressors: d independent unit-variance
// long-memory coordinates Z_i with memory exponents theta_i, mixed as
// X_t = A * mixing^T * Z_t where A = var0^{1/2}.  mixing must be orthogonal,
// var0 symmetric positive definite (identity by default).
struct RegressorLawSpec {
    int d = 1;
    std::vector<double> thetas = {0.4};
    Eigen::MatrixXd mixing;  // empty => identity
    Eigen::MatrixXd var0;    // empty => identity

    void validate() const;
    Eigen::MatrixXd mixing_or_identity() const;
    Eigen::MatrixXd var0_or_identity() const;
};

// Two-phase linear regression truth: y_t = x_t . beta1 for t <= [n pi0],
// y_t = x_t . beta2 afterwards, plus long-memory noise.
struct ModelSpec {
    int d = 1;
    Eigen::VectorXd beta1;
    Eigen::VectorXd beta2;
    double pi0 = 0.5;
    ErrorLawSpec error_law;
    RegressorLawSpec regressor_law;

    void validate() const;  // identifiability needs beta1 != beta2
};

struct Dataset {
    Eigen::MatrixXd X;  // n x d
    Eigen::VectorXd y;  // n
    int n = 0;
    int d = 0;
    std::uint64_t seed = 0;
    int true_k = -1;  // [n pi0] when synthetic, -1 when loaded from file
};

// Closed-form autocovariance of the error law at lags 0..max_lag.
std::vector<double> autocovariance(const ErrorLawSpec& spec, int max_lag);

// Unit-variance fGn autocovariance with memory exponent alpha (H=1-alpha/2);
// also the law of each regressor coordinate with alpha = theta_i.
std::vector<double> fgn_autocovariance(double alpha, int max_lag);

struct GenDiagnostics {
    bool used_dense = false;
    double min_embedding_eigenvalue = 0.0;
    double min_dense_eigenvalue = 0.0;
    int clipped_eigenvalues = 0;
};

// Exact draw from the stationary Gaussian law with unit-variance
// autocovariance acv_unit (lags 0..n-1): circulant embedding of size
// 2(n-1) with FFT sampling.  Embedding eigenvalues in [-1e-8, 0) are clipped
// to 0; anything lower falls back to a dense eigendecomposition of the
// Toeplitz covariance, and CovarianceNotPsdError is thrown if that is
// indefinite below the same tolerance.
Eigen::VectorXd gen_stationary_gaussian(const std::vector<double>& acv_unit, int n,
                                        RngStream& rng, GenDiagnostics* diag = nullptr);

// Error-noise draw on the "errors" stream of `seed`, scaled by sigma0.
Eigen::VectorXd gen_scalar_lrd(const ErrorLawSpec& spec, int n, std::uint64_t seed,
                               GenDiagnostics* diag = nullptr);

// Regressor draw: coordinate i uses the ("regressors", i) stream of `seed`.
Eigen::MatrixXd gen_vector_lrd(const RegressorLawSpec& spec, int n, std::uint64_t seed);

// Matrix autocovariance the generator above realises:
//   Gamma(t) = A mixing^T diag(gamma_{theta_i}(t)) mixing A,  A = var0^{1/2}.
// At t = 0 this is var0 exactly.
Eigen::MatrixXd induced_regressor_autocovariance(const RegressorLawSpec& spec, int lag);

// Full synthetic dataset; errors and regressors use independent streams of
// the same seed.  Requires n > 2(d+1) and 1 <= [n pi0] <= n-1.
Dataset synthesize(const ModelSpec& model, int n, std::uint64_t seed);

}

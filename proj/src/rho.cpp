#include "sbreak/rho.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sbreak/errors.hpp"

namespace sbreak {

namespace {

// Upper-tail Gaussian moments I_m = \int_c^inf z^m phi(z) dz for m = 0..m_max,
// by parts: I_m = c^{m-1} phi(c) + (m-1) I_{m-2}.
std::vector<double> tail_moments(double c, int m_max) {
    std::vector<double> I(static_cast<size_t>(m_max) + 1);
    const double phi_c =
        std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
    I[0] = 0.5 * std::erfc(c / std::numbers::sqrt2);
    if (m_max >= 1) I[1] = phi_c;
    double cp = phi_c;  // c^{m-1} phi(c)
    for (int m = 2; m <= m_max; ++m) {
        cp *= c;
        I[static_cast<size_t>(m)] = cp + static_cast<double>(m - 1) * I[static_cast<size_t>(m - 2)];
    }
    return I;
}

// Monomial coefficients of the probabilists' Hermite polynomial He_q.
std::vector<double> hermite_monomials(int q) {
    std::vector<double> h0{1.0};
    if (q == 0) return h0;
    std::vector<double> h1{0.0, 1.0};
    for (int k = 1; k < q; ++k) {
        std::vector<double> h2(static_cast<size_t>(k) + 2, 0.0);
        for (size_t i = 0; i < h1.size(); ++i) h2[i + 1] += h1[i];
        for (size_t i = 0; i < h0.size(); ++i) h2[i] -= static_cast<double>(k) * h0[i];
        h0 = std::move(h1);
        h1 = std::move(h2);
    }
    return h1;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int n) {
    if (n < 2) throw std::invalid_argument("gauss_hermite: need n >= 2");
    static std::mutex mu;
    static std::map<int, GaussHermiteRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    // Jacobi matrix for the probabilists' Hermite recurrence: zero diagonal,
    // off-diagonal sqrt(k).  Eigenvalues are the nodes; weights come from the
    // squared first components of the eigenvectors (total mass 1 because the
    // weight function is the normal density itself).
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        J(k - 1, k) = b;
        J(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;
    }
    auto [pos, inserted] = cache.emplace(n, std::move(rule));
    (void)inserted;
    return pos->second;
}

double normal_expectation(const std::function<double(double)>& f, int n) {
    const GaussHermiteRule& rule = gauss_hermite(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += rule.weights[i] * f(rule.nodes[i]);
    return acc;
}

double RhoKernel::consistency_constant() const {
    // rho equals the polynomial p(z) = 3u^2 - 3u^4 + u^6 (u = z/c) on [-c, c]
    // and saturates at 1 outside, so
    //   E rho(Z) = E p(Z) - 2 \int_c^inf (p(z) - 1) phi(z) dz.
    // The polynomial expectation is a Gauss-Hermite sum (exact at degree 6);
    // the saturation excess reduces to erfc and tail moments.  Quadrature
    // straddling the kink at |z| = c would plateau near 1e-5 accuracy.
    const double cc = c;
    const double Ep = normal_expectation(
        [cc](double z) {
            const double u2 = (z / cc) * (z / cc);
            return u2 * (3.0 + u2 * (-3.0 + u2));
        },
        200);
    // p - 1 = (u^2 - 1)^3 = -1 + 3u^2 - 3u^4 + u^6.
    const auto I = tail_moments(cc, 6);
    const double c2 = cc * cc, c4 = c2 * c2, c6 = c4 * c2;
    const double excess =
        -I[0] + 3.0 * I[2] / c2 - 3.0 * I[4] / c4 + I[6] / c6;
    return Ep - 2.0 * excess;
}

double hermite_poly(int q, double x) {
    if (q == 0) return 1.0;
    double h0 = 1.0, h1 = x;
    for (int k = 1; k < q; ++k) {
        const double h2 = x * h1 - static_cast<double>(k) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

double default_tuning_constant() {
    static const double cstar = [] {
        // K(c) is strictly decreasing in c; bisect K(c) = 1/2.
        double lo = 0.5, hi = 4.0;
        for (int i = 0; i < 200 && (hi - lo) > 1e-15 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (RhoKernel{mid}.consistency_constant() > 0.5)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }();
    return cstar;
}

RhoKernel default_kernel() { return RhoKernel{default_tuning_constant()}; }

HermiteAnalysis hermite_coeffs_of(const std::function<double(double)>& chi,
                                  int q_max, double threshold) {
    if (q_max < 1) throw std::invalid_argument("hermite_coeffs: q_max >= 1");
    HermiteAnalysis out;
    out.coeffs.resize(q_max);
    out.rank = 0;
    for (int q = 1; q <= q_max; ++q) {
        out.coeffs[q - 1] = normal_expectation(
            [&](double z) { return chi(z) * hermite_poly(q, z); }, 240);
        if (out.rank == 0 && std::abs(out.coeffs[q - 1]) > threshold)
            out.rank = q;
    }
    if (out.rank == 0)
        throw RankNotFoundError("hermite_coeffs: all coefficients below threshold up to q_max");
    return out;
}

HermiteAnalysis hermite_coeffs(const RhoKernel& kernel, int q_max, double threshold) {
    if (q_max < 1) throw std::invalid_argument("hermite_coeffs: q_max >= 1");
    // Same saturation split as consistency_constant(): Gauss-Hermite handles
    // the polynomial branch p exactly, and the |z| > c excess
    //   2 \int_c^inf (p - 1) He_q phi dz
    // comes out in closed form via tail moments.  It vanishes for odd q.
    const double K = kernel.consistency_constant();
    const double cc = kernel.c;
    const auto I = tail_moments(cc, q_max + 6);
    const double b[4] = {-1.0, 3.0, -3.0, 1.0};  // (u^2-1)^3 in powers of u^2
    HermiteAnalysis out;
    out.coeffs.resize(static_cast<size_t>(q_max));
    out.rank = 0;
    for (int q = 1; q <= q_max; ++q) {
        double v = normal_expectation(
            [&](double z) {
                const double u2 = (z / cc) * (z / cc);
                const double p = u2 * (3.0 + u2 * (-3.0 + u2));
                return (p - K) * hermite_poly(q, z);
            },
            240);
        if (q % 2 == 0) {
            const auto h = hermite_monomials(q);
            double excess = 0.0;
            for (int i = 0; i <= q; ++i) {
                if (h[static_cast<size_t>(i)] == 0.0) continue;
                double cj = 1.0;  // c^{-2j}
                for (int j = 0; j <= 3; ++j) {
                    excess += h[static_cast<size_t>(i)] * b[j] * cj *
                              I[static_cast<size_t>(i + 2 * j)];
                    cj /= cc * cc;
                }
            }
            v -= 2.0 * excess;
        }
        out.coeffs[static_cast<size_t>(q - 1)] = v;
        if (out.rank == 0 && std::abs(v) > threshold) out.rank = q;
    }
    if (out.rank == 0)
        throw RankNotFoundError("hermite_coeffs: all coefficients below threshold up to q_max");
    return out;
}

double rate_constant(double alpha, std::span<const double> thetas, int q1) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("rate_constant: alpha must lie in (0,1)");
    if (q1 < 1) throw std::invalid_argument("rate_constant: q1 >= 1");
    double k = alpha * static_cast<double>(q1) / 2.0;
    for (double th : thetas) {
        if (!(th > 0.0 && th < 1.0))
            throw std::invalid_argument("rate_constant: theta must lie in (0,1)");
        k = std::min(k, (th + alpha) / 2.0);
    }
    return k;
}

}

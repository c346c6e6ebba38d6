#include "sbreak/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sbreak/rho.hpp"
#include "sbreak/rng.hpp"

namespace sbreak {

namespace {

// Runs body(i) for i in [0, total) across `threads` workers.  Each task
// writes only to its own output slot, so claim order never leaks into the
// results and any thread count reproduces the same bytes.
template <typename Fn>
void parallel_tasks(int total, int threads, Fn&& body) {
    if (threads <= 1 || total <= 1) {
        for (int i = 0; i < total; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= total) return;
            try {
                body(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const int nw = std::min(threads, total);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    if (m % 2 == 1) return v[m / 2];
    return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

RateCell summarize(int n, const char* metric, const std::vector<double>& errs) {
    RateCell c;
    c.n = n;
    c.metric = metric;
    c.replicates = static_cast<int>(errs.size());
    c.median = median_of(errs);
    const double m = static_cast<double>(errs.size());
    c.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / m;
    if (errs.size() > 1) {
        double ss = 0.0;
        for (double e : errs) ss += (e - c.mean) * (e - c.mean);
        c.stderr_mean = std::sqrt(ss / (m - 1.0) / m);
    }
    return c;
}

SlopeFit fit_slope(const char* metric, const char* basis, const std::vector<int>& ns,
                   const std::vector<double>& vals) {
    SlopeFit f;
    f.metric = metric;
    f.basis = basis;
    if (ns.size() < 4) {
        f.reason = "needs at least four sample sizes";
        return f;
    }
    for (double v : vals) {
        if (!(v > 0.0)) {
            f.reason = "nonpositive summary value, log-log fit undefined";
            return f;
        }
    }
    const std::size_t m = ns.size();
    double sx = 0.0, sy = 0.0;
    std::vector<double> xs(m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = std::log(static_cast<double>(ns[i]));
        ys[i] = std::log(vals[i]);
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / static_cast<double>(m);
    const double my = sy / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ys[i] - f.intercept - f.slope * xs[i];
        sse += r * r;
    }
    f.stderr_slope = std::sqrt(sse / static_cast<double>(m - 2) / sxx);
    f.valid = true;
    return f;
}

double ratio_or_inf(double num, double den) {
    if (den > 0.0) return num / den;
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

bool ordering_check(double beta_slope, double pi_slope) {
    return pi_slope <= beta_slope - 0.5;
}

const SlopeFit* preferred_slope(const RateReport& report, const std::string& metric) {
    const SlopeFit* mean_fit = nullptr;
    for (const SlopeFit& s : report.slopes) {
        if (s.metric != metric || !s.valid) continue;
        if (s.basis == "median") return &s;
        if (s.basis == "mean") mean_fit = &s;
    }
    return mean_fit;
}

RateReport run_rate_study(const RateStudySpec& spec) {
    spec.model.validate();
    if (spec.ns.empty()) throw std::invalid_argument("rate study: ns must be nonempty");
    if (spec.replicates < 1) throw std::invalid_argument("rate study: replicates must be >= 1");

    const RhoKernel kernel = spec.fit.resolved_kernel();
    const HermiteAnalysis ha = hermite_coeffs(kernel, 8, 1e-8);

    RateReport rep;
    rep.hermite_rank = ha.rank;
    rep.rate_constant =
        rate_constant(spec.model.error_law.alpha, spec.model.regressor_law.thetas, ha.rank);
    rep.beta_slope_target = -rep.rate_constant;
    rep.pi_slope_target = -(1.0 + rep.rate_constant);
    rep.underpowered = spec.replicates < 20 || spec.ns.size() < 4;

    static const char* kMetrics[5] = {"beta1", "beta2", "beta", "sigma", "pi"};
    const int M = spec.replicates;
    const int nn = static_cast<int>(spec.ns.size());
    std::vector<std::array<std::vector<double>, 5>> errs(static_cast<std::size_t>(nn));
    for (auto& block : errs)
        for (auto& v : block) v.resize(static_cast<std::size_t>(M));

    parallel_tasks(nn * M, spec.threads, [&](int t) {
        const int ni = t / M;
        const int r = t % M;
        const int n = spec.ns[static_cast<std::size_t>(ni)];
        const std::uint64_t rep_seed = RngStream::derive_key(
            spec.seed, "replicate", static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
        const Dataset ds = synthesize(spec.model, n, rep_seed);
        FitConfig f = spec.fit;
        f.seed = rep_seed;
        f.threads = 1;
        const FitResult fr = profile_changepoint(ds, f);
        const double e1 = (fr.beta1 - spec.model.beta1).norm();
        const double e2 = (fr.beta2 - spec.model.beta2).norm();
        auto& block = errs[static_cast<std::size_t>(ni)];
        const auto rr = static_cast<std::size_t>(r);
        block[0][rr] = e1;
        block[1][rr] = e2;
        block[2][rr] = std::max(e1, e2);
        block[3][rr] = std::abs(fr.sigma_hat - spec.model.error_law.sigma0);
        block[4][rr] = std::abs(fr.pi_hat - spec.model.pi0);
    });

    for (int ni = 0; ni < nn; ++ni)
        for (int mi = 0; mi < 5; ++mi)
            rep.cells.push_back(summarize(spec.ns[static_cast<std::size_t>(ni)], kMetrics[mi],
                                          errs[static_cast<std::size_t>(ni)]
                                              [static_cast<std::size_t>(mi)]));

    for (int mi : {2, 3, 4}) {
        std::vector<double> medians, means;
        for (int ni = 0; ni < nn; ++ni) {
            const auto& v = errs[static_cast<std::size_t>(ni)][static_cast<std::size_t>(mi)];
            medians.push_back(median_of(v));
            means.push_back(std::accumulate(v.begin(), v.end(), 0.0) /
                            static_cast<double>(v.size()));
        }
        rep.slopes.push_back(fit_slope(kMetrics[mi], "median", spec.ns, medians));
        rep.slopes.push_back(fit_slope(kMetrics[mi], "mean", spec.ns, means));
    }

    const SlopeFit* b = preferred_slope(rep, "beta");
    const SlopeFit* p = preferred_slope(rep, "pi");
    rep.ordering_ok = b != nullptr && p != nullptr && ordering_check(b->slope, p->slope);
    return rep;
}

RobustnessReport run_robustness_study(const RobustnessSpec& spec) {
    spec.model.validate();
    if (!(spec.fraction >= 0.0 && spec.fraction <= 0.3))
        throw std::invalid_argument("robustness study: fraction must lie in [0, 0.3]");
    if (!(spec.magnitude >= 0.0))
        throw std::invalid_argument("robustness study: magnitude must be nonnegative");
    if (spec.replicates < 1)
        throw std::invalid_argument("robustness study: replicates must be >= 1");

    const int M = spec.replicates;
    const int n = spec.n;
    std::array<std::vector<double>, 4> errs;  // s_clean, s_cont, ls_clean, ls_cont
    for (auto& v : errs) v.resize(static_cast<std::size_t>(M));

    parallel_tasks(M, spec.threads, [&](int r) {
        const std::uint64_t rep_seed = RngStream::derive_key(
            spec.seed, "replicate", static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r));
        Dataset ds = synthesize(spec.model, n, rep_seed);
        FitConfig f = spec.fit;
        f.seed = rep_seed;
        f.threads = 1;
        auto err_of = [&](const FitResult& fr) {
            return std::max((fr.beta1 - spec.model.beta1).norm(),
                            (fr.beta2 - spec.model.beta2).norm());
        };
        const auto rr = static_cast<std::size_t>(r);
        errs[0][rr] = err_of(profile_changepoint(ds, f));
        errs[2][rr] = err_of(ls_baseline_fit(ds, f));

        const int m = static_cast<int>(std::ceil(spec.fraction * n));
        if (m > 0) {
            // Distinct positions by partial Fisher-Yates; each hit response is
            // shifted by +-magnitude with a fair sign.
            RngStream cs(rep_seed, "contamination");
            std::vector<int> idx(static_cast<std::size_t>(n));
            std::iota(idx.begin(), idx.end(), 0);
            for (int i = 0; i < m; ++i) {
                const double u = cs.uniform();
                const int span = n - i;
                const int j = i + std::min(static_cast<int>(u * span), span - 1);
                std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
                const double sign = cs.uniform() > 0.5 ? 1.0 : -1.0;
                ds.y(idx[static_cast<std::size_t>(i)]) += sign * spec.magnitude;
            }
        }
        errs[1][rr] = err_of(profile_changepoint(ds, f));
        errs[3][rr] = err_of(ls_baseline_fit(ds, f));
    });

    static const char* kArmNames[4] = {"s_clean", "s_contaminated", "ls_clean",
                                       "ls_contaminated"};
    RobustnessReport rep;
    for (int a = 0; a < 4; ++a) {
        const auto& v = errs[static_cast<std::size_t>(a)];
        const RateCell c = summarize(n, kArmNames[a], v);
        RobustnessArm arm;
        arm.name = kArmNames[a];
        arm.median = c.median;
        arm.mean = c.mean;
        arm.stderr_mean = c.stderr_mean;
        rep.arms.push_back(arm);
    }
    rep.ls_over_s_contaminated = ratio_or_inf(rep.arms[3].median, rep.arms[1].median);
    rep.s_cont_over_clean = ratio_or_inf(rep.arms[1].median, rep.arms[0].median);
    return rep;
}

}  // namespace sbreak

#include "sbreak/estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "sbreak/errors.hpp"
#include "sbreak/rng.hpp"

namespace sbreak {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEqNormTarget = 5e-7;  // first-order residual polish target

// Ranks split fits: exact interpolation beats any positive scale.
bool better_fit(const SplitFit& a, const SplitFit& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    if (a.exact_fit != b.exact_fit) return a.exact_fit;
    return a.s < b.s;
}

class SplitFitter {
public:
    SplitFitter(const Dataset& ds, const FitConfig& cfg, const RhoKernel& kernel, double K)
        : ds_(ds), cfg_(cfg), kernel_(kernel), K_(K), r_(ds.n) {}

    // Best split fit at k.  warm seeds an IRLS chain from a neighbouring
    // solution; run_subsets adds the random exact-fit candidates.
    SplitFit fit(int k, const SplitFit* warm, bool run_subsets) {
        SplitFit best;
        best.s = kInf;

        if (warm != nullptr && warm->valid) {
            SplitFit f;
            f.beta1 = warm->beta1;
            f.beta2 = warm->beta2;
            start(k, f);
            if (f.valid) {
                irls(k, f, cfg_.irls_max_iter, true);
                best = f;
            }
        }
        if (run_subsets || !best.valid) {
            SplitFit f = subset_search(k);
            if (f.valid) {
                irls(k, f, cfg_.irls_max_iter, true);
                if (better_fit(f, best)) best = f;
            }
        }
        return best;
    }

    const Eigen::VectorXd& residuals(int k, const Eigen::VectorXd& b1,
                                     const Eigen::VectorXd& b2) {
        const int n = ds_.n;
        r_ = ds_.y;
        r_.head(k).noalias() -= ds_.X.topRows(k) * b1;
        r_.tail(n - k).noalias() -= ds_.X.bottomRows(n - k) * b2;
        return r_;
    }

private:
    // Evaluates the joint scale of (b1, b2).
    void start(int k, SplitFit& f) {
        residuals(k, f.beta1, f.beta2);
        const ScaleSolution sol =
            solve_scale({r_.data(), static_cast<std::size_t>(ds_.n)}, kernel_, K_, 0.0);
        if (sol.status != ScaleStatus::Ok) {
            interpolation_polish(k, f);
            return;
        }
        f.s = sol.s;
        f.valid = true;
        f.exact_fit = false;
    }

    // Interpolation case: the incoming coefficients starve the scale
    // equation (no positive root), which makes the joint scale 0+ by the
    // supremum convention, so this split is an exact fit whatever happens
    // next.  Plain LS per segment merely tidies the reported coefficients
    // and is adopted only when the polished point starves the equation too.
    void interpolation_polish(int k, SplitFit& f) {
        Eigen::VectorXd b1, b2;
        if (ls_segment(0, k, b1) && ls_segment(k, ds_.n, b2)) {
            residuals(k, b1, b2);
            const ScaleSolution sol =
                solve_scale({r_.data(), static_cast<std::size_t>(ds_.n)}, kernel_, K_, 0.0);
            if (sol.status != ScaleStatus::Ok) {
                f.beta1 = b1;
                f.beta2 = b2;
            }
        }
        f.s = 0.0;
        f.exact_fit = true;
        f.valid = true;
        f.converged = true;
    }

    bool ls_segment(int a, int b, Eigen::VectorXd& out) const {
        const int d = ds_.d;
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
        for (int t = a; t < b; ++t) {
            const auto x = ds_.X.row(t);
            G.noalias() += x.transpose() * x;
            v.noalias() += x.transpose() * ds_.y(t);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
        if (lu.rank() < d) return false;
        out = lu.solve(v);
        return true;
    }

    // One weighted LS proposal per segment; false on rank deficiency.
    bool wls_proposal(int k, double s, Eigen::VectorXd& p1, Eigen::VectorXd& p2) const {
        const int d = ds_.d;
        const int n = ds_.n;
        Eigen::MatrixXd G1 = Eigen::MatrixXd::Zero(d, d), G2 = Eigen::MatrixXd::Zero(d, d);
        Eigen::VectorXd v1 = Eigen::VectorXd::Zero(d), v2 = Eigen::VectorXd::Zero(d);
        const double a = 1.0 / (kernel_.c * s);
        for (int t = 0; t < n; ++t) {
            const double u = r_(t) * a;
            const double tt = 1.0 - u * u;
            if (tt <= 0.0) continue;
            const double w = tt * tt;  // psi(r/s)/(r/s) up to the constant 6/c^2
            const auto x = ds_.X.row(t);
            if (t < k) {
                G1.noalias() += w * x.transpose() * x;
                v1.noalias() += (w * ds_.y(t)) * x.transpose();
            } else {
                G2.noalias() += w * x.transpose() * x;
                v2.noalias() += (w * ds_.y(t)) * x.transpose();
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu1(G1);
        if (lu1.rank() < d) return false;
        Eigen::FullPivLU<Eigen::MatrixXd> lu2(G2);
        if (lu2.rank() < d) return false;
        p1 = lu1.solve(v1);
        p2 = lu2.solve(v2);
        return true;
    }

    double eq_norm(int k, double s, bool first_segment) const {
        const int a = first_segment ? 0 : k;
        const int b = first_segment ? k : ds_.n;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(ds_.d);
        for (int t = a; t < b; ++t)
            acc.noalias() += kernel_.psi(r_(t) / s) * ds_.X.row(t).transpose();
        return acc.norm() / static_cast<double>(ds_.n);
    }

    // IRLS with step halving on the joint scale; accepted steps never
    // increase s.  With polish=true, iteration continues past the relative
    // s-change tolerance until the first-order residual norms are at target.
    void irls(int k, SplitFit& f, int max_steps, bool polish) {
        if (!f.valid)
            start(k, f);
        else
            residuals(k, f.beta1, f.beta2);
        if (f.exact_fit) return;

        Eigen::VectorXd p1, p2, b1t, b2t;
        for (int it = 0; it < max_steps; ++it) {
            ++f.iterations;
            if (!wls_proposal(k, f.s, p1, p2)) {
                f.converged = false;
                return;
            }
            double h = 1.0;
            bool accepted = false;
            double s_new = f.s;
            for (int half = 0; half < 12; ++half) {
                b1t = f.beta1 + h * (p1 - f.beta1);
                b2t = f.beta2 + h * (p2 - f.beta2);
                residuals(k, b1t, b2t);
                const ScaleSolution sol =
                    solve_scale({r_.data(), static_cast<std::size_t>(ds_.n)}, kernel_, K_, f.s);
                if (sol.status != ScaleStatus::Ok) {
                    // trial point starves the scale equation: exact fit
                    f.beta1 = b1t;
                    f.beta2 = b2t;
                    interpolation_polish(k, f);
                    return;
                }
                if (sol.s <= f.s) {
                    accepted = true;
                    s_new = sol.s;
                    break;
                }
                h *= 0.5;
            }
            if (!accepted) {
                // No descent direction left at this resolution; treat the
                // current point as the fixed point.
                residuals(k, f.beta1, f.beta2);
                f.converged = true;
                return;
            }
            const double rel = (f.s - s_new) / f.s;
            f.beta1 = b1t;
            f.beta2 = b2t;
            f.s = s_new;
            if (rel <= cfg_.irls_tol) {
                if (!polish) {
                    f.converged = true;
                    return;
                }
                if (eq_norm(k, f.s, true) <= kEqNormTarget &&
                    eq_norm(k, f.s, false) <= kEqNormTarget) {
                    f.converged = true;
                    return;
                }
            }
        }
        f.converged = false;
    }

    // Candidate pairs from random d-point exact fits in each segment; the
    // five best by joint scale get two IRLS steps, the winner is returned.
    SplitFit subset_search(int k) {
        SplitFit none;
        std::vector<SplitFit> cands;
        cands.reserve(static_cast<std::size_t>(cfg_.n_subsets));
        for (int i = 0; i < cfg_.n_subsets; ++i) {
            RngStream rng(cfg_.seed, "subsets", static_cast<std::uint64_t>(k),
                          static_cast<std::uint64_t>(i));
            Eigen::VectorXd b1, b2;
            if (!exact_fit_draw(0, k, rng, b1)) continue;
            if (!exact_fit_draw(k, ds_.n, rng, b2)) continue;
            SplitFit f;
            f.beta1 = std::move(b1);
            f.beta2 = std::move(b2);
            residuals(k, f.beta1, f.beta2);
            const ScaleSolution sol =
                solve_scale({r_.data(), static_cast<std::size_t>(ds_.n)}, kernel_, K_, 0.0);
            if (sol.status != ScaleStatus::Ok) {
                interpolation_polish(k, f);
                return f;
            }
            f.s = sol.s;
            f.valid = true;
            cands.push_back(std::move(f));
        }
        if (cands.empty()) return none;

        const std::size_t keep = std::min<std::size_t>(5, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                          cands.end(),
                          [](const SplitFit& a, const SplitFit& b) { return a.s < b.s; });
        SplitFit best;
        best.s = kInf;
        for (std::size_t i = 0; i < keep; ++i) {
            SplitFit f = cands[i];
            irls(k, f, 2, false);
            if (f.exact_fit) return f;
            if (better_fit(f, best)) best = f;
        }
        return best;
    }

    bool exact_fit_draw(int a, int b, RngStream& rng, Eigen::VectorXd& out) const {
        const int d = ds_.d;
        const int len = b - a;
        if (len < d) return false;
        Eigen::MatrixXd Xi(d, d);
        Eigen::VectorXd yi(d);
        std::vector<int> idx(static_cast<std::size_t>(d));
        for (int attempt = 0; attempt < 20; ++attempt) {
            for (int j = 0; j < d; ++j) {
                int candidate;
                bool fresh;
                do {
                    candidate = a + static_cast<int>(rng.next_u64() %
                                                     static_cast<std::uint64_t>(len));
                    fresh = true;
                    for (int l = 0; l < j; ++l)
                        if (idx[static_cast<std::size_t>(l)] == candidate) fresh = false;
                } while (!fresh);
                idx[static_cast<std::size_t>(j)] = candidate;
                Xi.row(j) = ds_.X.row(candidate);
                yi(j) = ds_.y(candidate);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(Xi);
            if (lu.rank() == d) {
                out = lu.solve(yi);
                return true;
            }
        }
        return false;
    }

    const Dataset& ds_;
    const FitConfig& cfg_;
    RhoKernel kernel_;
    double K_;
    Eigen::VectorXd r_;
};

void admissible_range(const Dataset& ds, const FitConfig& cfg, int& kmin, int& kmax) {
    const int floor_pts = ds.d + 2;
    const int trim_pts = static_cast<int>(std::ceil(cfg.trim * static_cast<double>(ds.n)));
    kmin = std::max(floor_pts, trim_pts);
    kmax = ds.n - kmin;
    if (kmin > kmax)
        throw std::invalid_argument(
            "no admissible split: n too small for the trim fraction and segment floor");
}

void run_chunked(int n_items, int chunk, int threads,
                 const std::function<void(int, int)>& body) {
    const int n_chunks = (n_items + chunk - 1) / chunk;
    if (threads <= 1 || n_chunks <= 1) {
        for (int c = 0; c < n_chunks; ++c)
            body(c * chunk, std::min(n_items, (c + 1) * chunk));
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const int c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                body(c * chunk, std::min(n_items, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int T = std::min(threads, n_chunks);
    pool.reserve(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

SplitFit fit_segments(const Dataset& ds, int k, const FitConfig& cfg) {
    if (ds.n <= 2 * (ds.d + 1)) throw std::invalid_argument("fit_segments: need n > 2(d+1)");
    if (k < ds.d || ds.n - k < ds.d)
        throw std::invalid_argument("fit_segments: split leaves a segment short of d points");
    const RhoKernel kernel = cfg.resolved_kernel();
    const double K = kernel.consistency_constant();
    SplitFitter fitter(ds, cfg, kernel, K);
    SplitFit f = fitter.fit(k, nullptr, true);
    if (!f.valid)
        throw DegenerateSegmentError("fit_segments: weighted design rank-deficient at split " +
                                     std::to_string(k));
    return f;
}

FitResult profile_changepoint(const Dataset& ds, const FitConfig& cfg) {
    if (ds.n <= 2 * (ds.d + 1))
        throw std::invalid_argument("profile_changepoint: need n > 2(d+1)");
    int kmin, kmax;
    admissible_range(ds, cfg, kmin, kmax);
    const int nk = kmax - kmin + 1;

    const RhoKernel kernel = cfg.resolved_kernel();
    const double K = kernel.consistency_constant();

    std::vector<SplitFit> fits(static_cast<std::size_t>(nk));
    run_chunked(nk, cfg.chunk, cfg.threads, [&](int a, int b) {
        SplitFitter fitter(ds, cfg, kernel, K);
        const SplitFit* warm = nullptr;
        for (int j = a; j < b; ++j) {
            const bool chunk_start = (j == a);
            const bool stalled = warm != nullptr && (!warm->valid || !warm->converged);
            fits[static_cast<std::size_t>(j)] =
                fitter.fit(kmin + j, warm, chunk_start || stalled);
            warm = &fits[static_cast<std::size_t>(j)];
        }
    });

    int best = -1;
    for (int j = 0; j < nk; ++j) {
        if (!fits[static_cast<std::size_t>(j)].valid) continue;
        if (best < 0 || better_fit(fits[static_cast<std::size_t>(j)],
                                   fits[static_cast<std::size_t>(best)]))
            best = j;
    }
    if (best < 0)
        throw DegenerateSegmentError(
            "profile_changepoint: every candidate split was rank-deficient");

    // Final polish at the winner: subset search again plus the warm chain
    // result; adopt only improvements so the profile minimum stays exact.
    SplitFitter fitter(ds, cfg, kernel, K);
    SplitFit polished = fitter.fit(kmin + best, &fits[static_cast<std::size_t>(best)], true);
    if (better_fit(polished, fits[static_cast<std::size_t>(best)]))
        fits[static_cast<std::size_t>(best)] = polished;

    const SplitFit& win = fits[static_cast<std::size_t>(best)];
    const int k_hat = kmin + best;

    FitResult out;
    out.beta1 = win.beta1;
    out.beta2 = win.beta2;
    out.k_hat = k_hat;
    out.pi_hat = static_cast<double>(k_hat) / static_cast<double>(ds.n);
    out.sigma_hat = win.exact_fit ? 0.0 : win.s;
    out.k_min = kmin;
    out.profile.resize(static_cast<std::size_t>(nk));
    out.iterations.resize(static_cast<std::size_t>(nk));
    for (int j = 0; j < nk; ++j) {
        out.profile[static_cast<std::size_t>(j)] =
            fits[static_cast<std::size_t>(j)].valid ? fits[static_cast<std::size_t>(j)].s : kInf;
        out.iterations[static_cast<std::size_t>(j)] = fits[static_cast<std::size_t>(j)].iterations;
    }

    if (!win.exact_fit) {
        const Eigen::VectorXd& r = fitter.residuals(k_hat, win.beta1, win.beta2);
        std::span<const double> rs{r.data(), static_cast<std::size_t>(ds.n)};
        out.diagnostics.dn = dn_diagnostic(rs, win.s, kernel);
        Eigen::VectorXd acc1 = Eigen::VectorXd::Zero(ds.d), acc2 = Eigen::VectorXd::Zero(ds.d);
        for (int t = 0; t < ds.n; ++t) {
            const double p = kernel.psi(r(t) / win.s);
            if (t < k_hat)
                acc1.noalias() += p * ds.X.row(t).transpose();
            else
                acc2.noalias() += p * ds.X.row(t).transpose();
        }
        out.diagnostics.eq_b_norm = acc1.norm() / static_cast<double>(ds.n);
        out.diagnostics.eq_c_norm = acc2.norm() / static_cast<double>(ds.n);

        // Closed-form gradient vs central finite differences of the solved
        // scale, reported as an absolute deviation (the gradient itself is
        // near zero at the optimum).
        if (out.diagnostics.dn > 1e-12) {
            const ScaleGradient grad =
                scale_gradient(ds, k_hat, win.beta1, win.beta2, win.s, kernel);
            const double h = 1e-6;
            double max_dev = 0.0;
            SplitFitter fd(ds, cfg, kernel, K);
            for (int block = 0; block < 2; ++block) {
                for (int i = 0; i < ds.d; ++i) {
                    Eigen::VectorXd b1 = win.beta1, b2 = win.beta2;
                    double* entry = block == 0 ? &b1(i) : &b2(i);
                    *entry += h;
                    const Eigen::VectorXd& rp = fd.residuals(k_hat, b1, b2);
                    const double sp =
                        solve_scale({rp.data(), static_cast<std::size_t>(ds.n)}, kernel, K, win.s)
                            .s;
                    *entry -= 2.0 * h;
                    const Eigen::VectorXd& rm = fd.residuals(k_hat, b1, b2);
                    const double sm =
                        solve_scale({rm.data(), static_cast<std::size_t>(ds.n)}, kernel, K, win.s)
                            .s;
                    const double fd_grad = (sp - sm) / (2.0 * h);
                    const double cf = block == 0 ? grad.wrt_beta1(i) : grad.wrt_beta2(i);
                    max_dev = std::max(max_dev, std::abs(fd_grad - cf));
                }
            }
            out.diagnostics.gradient_fd_abs_error = max_dev;
        } else {
            out.diagnostics.gradient_fd_abs_error = std::numeric_limits<double>::quiet_NaN();
        }
    }
    out.diagnostics.out_of_box =
        out.beta1.cwiseAbs().maxCoeff() > cfg.box_halfwidth ||
        out.beta2.cwiseAbs().maxCoeff() > cfg.box_halfwidth;
    out.method = "s";
    return out;
}

ScaleGradient scale_gradient(const Dataset& ds, int k, const Eigen::VectorXd& beta1,
                             const Eigen::VectorXd& beta2, double s, const RhoKernel& kernel) {
    if (!(s > 0.0)) throw std::invalid_argument("scale_gradient: s must be positive");
    Eigen::VectorXd r = ds.y;
    r.head(k).noalias() -= ds.X.topRows(k) * beta1;
    r.tail(ds.n - k).noalias() -= ds.X.bottomRows(ds.n - k) * beta2;

    ScaleGradient g;
    g.dn = dn_diagnostic({r.data(), static_cast<std::size_t>(ds.n)}, s, kernel);
    if (!(g.dn > 1e-12))
        throw std::domain_error(
            "scale_gradient: D_n too small, implicit derivative unreliable");
    Eigen::VectorXd acc1 = Eigen::VectorXd::Zero(ds.d), acc2 = Eigen::VectorXd::Zero(ds.d);
    for (int t = 0; t < ds.n; ++t) {
        const double p = kernel.psi(r(t) / s);
        if (t < k)
            acc1.noalias() += p * ds.X.row(t).transpose();
        else
            acc2.noalias() += p * ds.X.row(t).transpose();
    }
    const double scale = -1.0 / (static_cast<double>(ds.n) * g.dn);
    g.wrt_beta1 = scale * acc1;
    g.wrt_beta2 = scale * acc2;
    return g;
}

FitResult ls_baseline_fit(const Dataset& ds, const FitConfig& cfg) {
    if (ds.n <= 2 * (ds.d + 1)) throw std::invalid_argument("ls_baseline_fit: need n > 2(d+1)");
    int kmin, kmax;
    admissible_range(ds, cfg, kmin, kmax);
    const int nk = kmax - kmin + 1;
    const int d = ds.d;
    const int n = ds.n;

    // Running prefix Gram; the suffix is total minus prefix.
    Eigen::MatrixXd Gtot = Eigen::MatrixXd::Zero(d, d), G1 = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd vtot = Eigen::VectorXd::Zero(d), v1 = Eigen::VectorXd::Zero(d);
    double yy_tot = 0.0, yy1 = 0.0;
    for (int t = 0; t < n; ++t) {
        const auto x = ds.X.row(t);
        Gtot.noalias() += x.transpose() * x;
        vtot.noalias() += x.transpose() * ds.y(t);
        yy_tot += ds.y(t) * ds.y(t);
    }
    for (int t = 0; t < kmin; ++t) {
        const auto x = ds.X.row(t);
        G1.noalias() += x.transpose() * x;
        v1.noalias() += x.transpose() * ds.y(t);
        yy1 += ds.y(t) * ds.y(t);
    }

    FitResult out;
    out.k_min = kmin;
    out.profile.assign(static_cast<std::size_t>(nk), kInf);
    out.iterations.assign(static_cast<std::size_t>(nk), 0);
    int best = -1;
    double best_s = kInf;
    for (int j = 0; j < nk; ++j) {
        const int k = kmin + j;
        if (j > 0) {
            const auto x = ds.X.row(k - 1);
            G1.noalias() += x.transpose() * x;
            v1.noalias() += x.transpose() * ds.y(k - 1);
            yy1 += ds.y(k - 1) * ds.y(k - 1);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu1(G1);
        if (lu1.rank() < d) continue;
        Eigen::FullPivLU<Eigen::MatrixXd> lu2(Gtot - G1);
        if (lu2.rank() < d) continue;
        const Eigen::VectorXd b1 = lu1.solve(v1);
        const Eigen::VectorXd b2 = lu2.solve(vtot - v1);
        const double sse1 = std::max(0.0, yy1 - v1.dot(b1));
        const double sse2 = std::max(0.0, (yy_tot - yy1) - (vtot - v1).dot(b2));
        const double s = std::sqrt((sse1 + sse2) / static_cast<double>(n));
        out.profile[static_cast<std::size_t>(j)] = s;
        if (s < best_s) {
            best_s = s;
            best = j;
        }
    }
    if (best < 0)
        throw DegenerateSegmentError("ls_baseline_fit: every candidate split was rank-deficient");

    // Recompute the winner's coefficients.
    const int k_hat = kmin + best;
    Eigen::MatrixXd Gw = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd vw = Eigen::VectorXd::Zero(d);
    for (int t = 0; t < k_hat; ++t) {
        const auto x = ds.X.row(t);
        Gw.noalias() += x.transpose() * x;
        vw.noalias() += x.transpose() * ds.y(t);
    }
    out.beta1 = Eigen::FullPivLU<Eigen::MatrixXd>(Gw).solve(vw);
    out.beta2 = Eigen::FullPivLU<Eigen::MatrixXd>(Gtot - Gw).solve(vtot - vw);
    out.k_hat = k_hat;
    out.pi_hat = static_cast<double>(k_hat) / static_cast<double>(n);
    out.sigma_hat = best_s;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.diagnostics.dn = nan;
    out.diagnostics.eq_b_norm = nan;
    out.diagnostics.eq_c_norm = nan;
    out.diagnostics.gradient_fd_abs_error = nan;
    out.diagnostics.out_of_box = out.beta1.cwiseAbs().maxCoeff() > cfg.box_halfwidth ||
                                 out.beta2.cwiseAbs().maxCoeff() > cfg.box_halfwidth;
    out.method = "ls";
    return out;
}

}

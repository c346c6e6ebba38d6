#include "sbreak/cli_app.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "sbreak/config.hpp"
#include "sbreak/csvio.hpp"
#include "sbreak/errors.hpp"
#include "sbreak/estimator.hpp"
#include "sbreak/experiments.hpp"
#include "sbreak/procgen.hpp"
#include "sbreak/report.hpp"
#include "sbreak/svg.hpp"
#include "sbreak/version.hpp"

namespace sbreak {

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    int threads = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;

    void attach(CLI::App* cmd, bool out_required) {
        cmd->add_option("--config", config_path, "INI config file");
        auto* out = cmd->add_option("--out", out_path, "output path");
        if (out_required) out->required();
        seed_opt = cmd->add_option("--seed", seed, "stream seed (overrides config)");
        threads_opt = cmd->add_option("--threads", threads, "worker threads");
    }
};

CliConfig load_config(const CommonFlags& fl) {
    CliConfig cfg;
    if (fl.config_path.empty()) {
        cfg = default_config();
    } else {
        try {
            cfg = parse_config_file(fl.config_path);
        } catch (const IoError& e) {
            // An unreadable config is a usage problem, not a data I/O failure.
            throw ConfigError(e.what());
        }
    }
    if (fl.seed_opt != nullptr && fl.seed_opt->count() > 0) {
        cfg.seed = fl.seed;
        cfg.has_seed = true;
        set_echo(cfg, "seed", std::to_string(cfg.seed));
    }
    if (fl.threads_opt != nullptr && fl.threads_opt->count() > 0) cfg.threads = fl.threads;
    return cfg;
}

int resolve_threads(const CliConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void require_seed(const CliConfig& cfg, const char* cmd) {
    if (!cfg.has_seed)
        throw ConfigError(std::string(cmd) + ": seed is required (config key or --seed)");
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// "report.json" -> "report", anything else unchanged.
std::string stem_of(const std::string& path) {
    const std::string suffix = ".json";
    if (path.size() > suffix.size() &&
        path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return path.substr(0, path.size() - suffix.size());
    return path;
}

int cmd_gen(const CommonFlags& fl) {
    CliConfig cfg = load_config(fl);
    require_seed(cfg, "gen");
    const Dataset ds = synthesize(cfg.model, cfg.n, cfg.seed);
    write_dataset_csv(fl.out_path, ds);
    write_text_file(fl.out_path + ".truth.json",
                    truth_sidecar_json(cfg.model, ds.n, cfg.seed, ds.true_k, cfg));
    std::printf("wrote %s (n=%d, d=%d, true_k=%d)\n", fl.out_path.c_str(), ds.n, ds.d,
                ds.true_k);
    return 0;
}

int cmd_fit(const std::string& data_path, const CommonFlags& fl) {
    CliConfig cfg = load_config(fl);
    const Dataset ds = read_dataset_csv(data_path);
    if (ds.n <= 2 * (ds.d + 2))
        throw ConfigError("fit: need n > 2(d+2), got n=" + std::to_string(ds.n) +
                          ", d=" + std::to_string(ds.d));

    std::optional<TruthInfo> truth;
    const std::string sidecar = data_path + ".truth.json";
    if (std::filesystem::exists(sidecar)) truth = truth_from_json(read_text_file(sidecar));

    FitConfig fit_cfg = cfg.fit;
    fit_cfg.seed = cfg.seed;
    fit_cfg.threads = resolve_threads(cfg);
    const FitResult fit = profile_changepoint(ds, fit_cfg);

    const std::string out = fl.out_path.empty() ? data_path + ".fit.json" : fl.out_path;
    write_text_file(out, fit_report_json(fit, ds, cfg, truth));
    const std::string stem = stem_of(out);
    write_profile_csv(stem + "_profile.csv", fit.k_min, fit.profile);
    write_profile_svg(stem + "_profile.svg", fit.k_min, fit.profile, fit.k_hat);
    std::printf("wrote %s (k_hat=%d, pi_hat=%s, sigma_hat=%s)\n", out.c_str(), fit.k_hat,
                format_double(fit.pi_hat).c_str(), format_double(fit.sigma_hat).c_str());
    return 0;
}

int cmd_rho(const CommonFlags& fl) {
    CliConfig cfg = load_config(fl);
    const std::string report = rho_report_json(cfg);
    if (fl.out_path.empty()) {
        std::fputs(report.c_str(), stdout);
    } else {
        write_text_file(fl.out_path, report);
        std::printf("wrote %s\n", fl.out_path.c_str());
    }
    return 0;
}

bool within(double value, double target, double tol) {
    return value >= target - tol && value <= target + tol;
}

int cmd_mc(const CommonFlags& fl) {
    CliConfig cfg = load_config(fl);
    require_seed(cfg, "mc");
    const int threads = resolve_threads(cfg);
    const std::string prefix = fl.out_path;
    bool gates_ok = true;

    if (cfg.study.kind == "rate" || cfg.study.kind == "both") {
        RateStudySpec spec;
        spec.model = cfg.model;
        spec.fit = cfg.fit;
        spec.ns = cfg.study.ns;
        spec.replicates = cfg.study.replicates;
        spec.seed = cfg.seed;
        spec.threads = threads;
        const RateReport rep = run_rate_study(spec);
        write_text_file(prefix + "_rate.json", rate_report_json(rep, cfg));
        write_rate_csv(prefix + "_rate.csv", rep);
        for (const char* metric : {"beta", "sigma", "pi"})
            write_rate_svg(prefix + "_" + std::string(metric) + ".svg", rep, metric);
        std::printf("wrote %s_rate.json (rate_constant=%s)\n", prefix.c_str(),
                    format_double(rep.rate_constant).c_str());
        if (rep.underpowered)
            std::fprintf(stderr, "warning: study underpowered (replicates=%d, sample sizes=%zu)\n",
                         cfg.study.replicates, cfg.study.ns.size());
        if (cfg.study.check_slopes && rep.underpowered) {
            std::fprintf(stderr, "warning: slope gates skipped (study underpowered)\n");
        } else if (cfg.study.check_slopes) {
            const SlopeFit* b = preferred_slope(rep, "beta");
            const SlopeFit* s = preferred_slope(rep, "sigma");
            const SlopeFit* p = preferred_slope(rep, "pi");
            const struct {
                const char* name;
                const SlopeFit* fit;
                double target, tol;
            } checks[] = {
                {"beta", b, rep.beta_slope_target, cfg.study.slope_tol_beta},
                {"sigma", s, rep.beta_slope_target, cfg.study.slope_tol_sigma},
                {"pi", p, rep.pi_slope_target, cfg.study.slope_tol_pi},
            };
            for (const auto& ck : checks) {
                const bool ok =
                    ck.fit != nullptr && within(ck.fit->slope, ck.target, ck.tol);
                if (!ok) gates_ok = false;
                std::printf("gate slope_%s: %s (fitted %s, target %s +- %s)\n", ck.name,
                            ok ? "pass" : "FAIL",
                            ck.fit != nullptr ? format_double(ck.fit->slope).c_str() : "n/a",
                            format_double(ck.target).c_str(), format_double(ck.tol).c_str());
            }
            std::printf("gate ordering: %s\n", rep.ordering_ok ? "pass" : "FAIL");
            if (!rep.ordering_ok) gates_ok = false;
        }
    }

    if (cfg.study.kind == "robustness" || cfg.study.kind == "both") {
        RobustnessSpec spec;
        spec.model = cfg.model;
        spec.fit = cfg.fit;
        spec.n = cfg.study.robust_n;
        spec.replicates = cfg.study.robust_replicates;
        spec.seed = cfg.seed;
        spec.threads = threads;
        spec.fraction = cfg.study.fraction;
        spec.magnitude = cfg.study.magnitude;
        const RobustnessReport rep = run_robustness_study(spec);
        write_text_file(prefix + "_robustness.json", robustness_report_json(rep, cfg));
        std::printf("wrote %s_robustness.json (ls/s=%s, cont/clean=%s)\n", prefix.c_str(),
                    format_double(rep.ls_over_s_contaminated).c_str(),
                    format_double(rep.s_cont_over_clean).c_str());
        if (cfg.study.check_robustness) {
            const bool r1 = rep.ls_over_s_contaminated >= cfg.study.ls_ratio_min;
            const bool r2 = rep.s_cont_over_clean <= cfg.study.clean_ratio_max;
            std::printf("gate ls_ratio: %s (%s >= %s)\n", r1 ? "pass" : "FAIL",
                        format_double(rep.ls_over_s_contaminated).c_str(),
                        format_double(cfg.study.ls_ratio_min).c_str());
            std::printf("gate clean_ratio: %s (%s <= %s)\n", r2 ? "pass" : "FAIL",
                        format_double(rep.s_cont_over_clean).c_str(),
                        format_double(cfg.study.clean_ratio_max).c_str());
            if (!r1 || !r2) gates_ok = false;
        }
    }

    return gates_ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"two-phase regression S-estimation under long memory"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonFlags gen_fl, fit_fl, rho_fl, mc_fl;
    std::string data_path;

    CLI::App* gen = app.add_subcommand("gen", "synthesize a dataset and truth sidecar");
    gen_fl.attach(gen, true);
    CLI::App* fit = app.add_subcommand("fit", "estimate the change point and coefficients");
    fit->add_option("data", data_path, "dataset CSV")->required();
    fit_fl.attach(fit, false);
    CLI::App* rho = app.add_subcommand("rho", "kernel constants and Hermite analysis");
    rho_fl.attach(rho, false);
    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo rate/robustness studies");
    mc_fl.attach(mc, true);

    std::vector<const char*> argv;
    argv.push_back("sbreak");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_fl);
        if (fit->parsed()) return cmd_fit(data_path, fit_fl);
        if (rho->parsed()) return cmd_rho(rho_fl);
        if (mc->parsed()) return cmd_mc(mc_fl);
        std::fprintf(stderr, "usage error: no command given\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const CovarianceNotPsdError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const RankNotFoundError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DegenerateSegmentError& e) {
        std::fprintf(stderr, "degenerate fit: %s\n", e.what());
        return 3;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "degenerate fit: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace sbreak

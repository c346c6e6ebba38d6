#include "sbreak/report.hpp"

#include <cmath>

#include "json.hpp"
#include "sbreak/errors.hpp"
#include "sbreak/rho.hpp"
#include "sbreak/version.hpp"

namespace sbreak {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vector_from_json(const json& a, const char* key) {
    if (!a.is_array()) throw ConfigError(std::string("truth sidecar: ") + key + " must be an array");
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return "identity";
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

Eigen::MatrixXd matrix_from_json(const json& a, int d, const char* key) {
    if (a.is_string() && a.get<std::string>() == "identity") return {};
    if (!a.is_array() || static_cast<int>(a.size()) != d * d)
        throw ConfigError(std::string("truth sidecar: ") + key + " must be 'identity' or " +
                          std::to_string(d * d) + " row-major entries");
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            m(i, j) = a[static_cast<std::size_t>(i) * d + j].get<double>();
    return m;
}

json model_to_json(const ModelSpec& model) {
    json j;
    j["d"] = model.d;
    j["beta1"] = vector_to_json(model.beta1);
    j["beta2"] = vector_to_json(model.beta2);
    j["pi0"] = model.pi0;
    j["alpha"] = model.error_law.alpha;
    j["sigma0"] = model.error_law.sigma0;
    j["kernel"] = model.error_law.kernel == ErrorKernel::Fgn ? "fgn" : "powerlaw";
    j["slowly_varying"] =
        model.error_law.slowly_varying == SlowlyVarying::One ? "one" : "logshift";
    j["thetas"] = model.regressor_law.thetas;
    j["mixing"] = matrix_to_json(model.regressor_law.mixing);
    j["var0"] = matrix_to_json(model.regressor_law.var0);
    return j;
}

json header(const CliConfig& cfg) {
    json j;
    j["version"] = kVersion;
    j["config_echo"] = cfg.echo;
    return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string fit_report_json(const FitResult& fit, const Dataset& ds, const CliConfig& cfg,
                            const std::optional<TruthInfo>& truth) {
    json j = header(cfg);
    j["method"] = fit.method;
    j["n"] = ds.n;
    j["d"] = ds.d;
    j["beta1"] = vector_to_json(fit.beta1);
    j["beta2"] = vector_to_json(fit.beta2);
    j["k_hat"] = fit.k_hat;
    j["pi_hat"] = fit.pi_hat;
    j["sigma_hat"] = fit.sigma_hat;
    j["k_min"] = fit.k_min;
    j["profile"] = fit.profile;
    j["iterations"] = fit.iterations;
    json diag;
    diag["dn"] = fit.diagnostics.dn;
    diag["eq_b_norm"] = fit.diagnostics.eq_b_norm;
    diag["eq_c_norm"] = fit.diagnostics.eq_c_norm;
    diag["gradient_fd_abs_error"] = fit.diagnostics.gradient_fd_abs_error;
    diag["out_of_box"] = fit.diagnostics.out_of_box;
    j["diagnostics"] = diag;
    if (truth) {
        j["truth"] = model_to_json(truth->model);
        j["truth"]["n"] = truth->n;
        j["truth"]["seed"] = truth->seed;
        j["truth"]["true_k"] = truth->true_k;
        json err;
        err["beta1"] = (fit.beta1 - truth->model.beta1).norm();
        err["beta2"] = (fit.beta2 - truth->model.beta2).norm();
        err["pi"] = std::abs(fit.pi_hat - truth->model.pi0);
        err["sigma"] = std::abs(fit.sigma_hat - truth->model.error_law.sigma0);
        err["k"] = fit.k_hat - truth->true_k;
        j["errors"] = err;
    }
    return dump(j);
}

std::string rate_report_json(const RateReport& rep, const CliConfig& cfg) {
    json j = header(cfg);
    j["kind"] = "rate";
    j["hermite_rank"] = rep.hermite_rank;
    j["rate_constant"] = rep.rate_constant;
    j["beta_slope_target"] = rep.beta_slope_target;
    j["pi_slope_target"] = rep.pi_slope_target;
    j["ordering_ok"] = rep.ordering_ok;
    j["underpowered"] = rep.underpowered;
    json cells = json::array();
    for (const RateCell& c : rep.cells) {
        json e;
        e["n"] = c.n;
        e["metric"] = c.metric;
        e["median"] = c.median;
        e["mean"] = c.mean;
        e["stderr"] = c.stderr_mean;
        e["replicates"] = c.replicates;
        cells.push_back(e);
    }
    j["cells"] = cells;
    json slopes = json::array();
    for (const SlopeFit& s : rep.slopes) {
        json e;
        e["metric"] = s.metric;
        e["basis"] = s.basis;
        e["slope"] = s.slope;
        e["intercept"] = s.intercept;
        e["stderr"] = s.stderr_slope;
        e["valid"] = s.valid;
        e["reason"] = s.reason;
        slopes.push_back(e);
    }
    j["slopes"] = slopes;
    return dump(j);
}

std::string robustness_report_json(const RobustnessReport& rep, const CliConfig& cfg) {
    json j = header(cfg);
    j["kind"] = "robustness";
    json arms = json::array();
    for (const RobustnessArm& a : rep.arms) {
        json e;
        e["name"] = a.name;
        e["median"] = a.median;
        e["mean"] = a.mean;
        e["stderr"] = a.stderr_mean;
        arms.push_back(e);
    }
    j["arms"] = arms;
    j["ls_over_s_contaminated"] = rep.ls_over_s_contaminated;
    j["s_cont_over_clean"] = rep.s_cont_over_clean;
    return dump(j);
}

std::string rho_report_json(const CliConfig& cfg) {
    const RhoKernel kernel = cfg.fit.resolved_kernel();
    const HermiteAnalysis ha = hermite_coeffs(kernel, 8, 1e-8);
    json j = header(cfg);
    j["c"] = kernel.c;
    j["K"] = kernel.consistency_constant();
    json coeffs;
    for (int q = 1; q <= 8; ++q)
        coeffs["J_" + std::to_string(q)] = ha.coeffs[static_cast<std::size_t>(q - 1)];
    j["hermite_coeffs"] = coeffs;
    j["q1"] = ha.rank;
    j["rate_constant"] = rate_constant(cfg.model.error_law.alpha,
                                       cfg.model.regressor_law.thetas, ha.rank);
    return dump(j);
}

std::string truth_sidecar_json(const ModelSpec& model, int n, std::uint64_t seed, int true_k,
                               const CliConfig& cfg) {
    json j = header(cfg);
    j["model"] = model_to_json(model);
    j["n"] = n;
    j["seed"] = seed;
    j["true_k"] = true_k;
    return dump(j);
}

TruthInfo truth_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("truth sidecar: ") + e.what());
    }
    try {
        TruthInfo t;
        const json& m = j.at("model");
        t.model.d = m.at("d").get<int>();
        t.model.beta1 = vector_from_json(m.at("beta1"), "beta1");
        t.model.beta2 = vector_from_json(m.at("beta2"), "beta2");
        t.model.pi0 = m.at("pi0").get<double>();
        t.model.error_law.alpha = m.at("alpha").get<double>();
        t.model.error_law.sigma0 = m.at("sigma0").get<double>();
        t.model.error_law.kernel =
            m.at("kernel").get<std::string>() == "powerlaw" ? ErrorKernel::PowerLaw
                                                            : ErrorKernel::Fgn;
        t.model.error_law.slowly_varying =
            m.at("slowly_varying").get<std::string>() == "logshift" ? SlowlyVarying::LogShift
                                                                    : SlowlyVarying::One;
        t.model.regressor_law.d = t.model.d;
        t.model.regressor_law.thetas = m.at("thetas").get<std::vector<double>>();
        t.model.regressor_law.mixing = matrix_from_json(m.at("mixing"), t.model.d, "mixing");
        t.model.regressor_law.var0 = matrix_from_json(m.at("var0"), t.model.d, "var0");
        t.n = j.at("n").get<int>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.true_k = j.at("true_k").get<int>();
        return t;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("truth sidecar: ") + e.what());
    }
}

}  // namespace sbreak

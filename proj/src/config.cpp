#include "sbreak/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>
#include <system_error>

#include "sbreak/csvio.hpp"
#include "sbreak/errors.hpp"

namespace sbreak {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

struct RawEntry {
    std::string value;
    int line = 0;
};

using Section = std::map<std::string, RawEntry>;

struct RawConfig {
    std::string origin;
    std::map<std::string, Section> sections;  // "" = top level

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw ConfigError(origin + " line " + std::to_string(line) + ": " + msg);
    }

    std::optional<RawEntry> take(const std::string& section, const std::string& key) {
        auto sit = sections.find(section);
        if (sit == sections.end()) return std::nullopt;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return std::nullopt;
        RawEntry e = kit->second;
        sit->second.erase(kit);
        return e;
    }

    void reject_leftovers() const {
        for (const auto& [sec, entries] : sections) {
            for (const auto& [key, e] : entries) {
                const std::string qual = sec.empty() ? key : sec + "." + key;
                fail(e.line, "unknown key '" + qual + "'");
            }
        }
    }
};

RawConfig scan(const std::string& text, const std::string& origin) {
    RawConfig raw;
    raw.origin = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') raw.fail(lineno, "malformed section header '" + t + "'");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section != "model" && section != "fit" && section != "study")
                raw.fail(lineno, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) raw.fail(lineno, "expected key = value, got '" + t + "'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) raw.fail(lineno, "empty key");
        auto [it, inserted] = raw.sections[section].emplace(key, RawEntry{value, lineno});
        if (!inserted)
            raw.fail(lineno, "duplicate key '" + key + "' (first set on line " +
                                 std::to_string(it->second.line) + ")");
    }
    return raw;
}

double to_double(const RawConfig& raw, const RawEntry& e, const std::string& key) {
    double v = 0.0;
    const std::string& s = e.value;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        raw.fail(e.line, key + ": cannot parse number '" + s + "'");
    return v;
}

long to_long(const RawConfig& raw, const RawEntry& e, const std::string& key) {
    long v = 0;
    const std::string& s = e.value;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        raw.fail(e.line, key + ": cannot parse integer '" + s + "'");
    return v;
}

std::uint64_t to_u64(const RawConfig& raw, const RawEntry& e, const std::string& key) {
    std::uint64_t v = 0;
    const std::string& s = e.value;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        raw.fail(e.line, key + ": cannot parse unsigned integer '" + s + "'");
    return v;
}

bool to_bool(const RawConfig& raw, const RawEntry& e, const std::string& key) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    raw.fail(e.line, key + ": expected true/false, got '" + e.value + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(std::string_view(s).substr(start)));
            return out;
        }
        out.push_back(trim(std::string_view(s).substr(start, pos - start)));
        start = pos + 1;
    }
}

std::vector<double> to_double_list(const RawConfig& raw, const RawEntry& e,
                                   const std::string& key) {
    std::vector<double> out;
    for (const std::string& tok : split_list(e.value)) {
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
            raw.fail(e.line, key + ": cannot parse number '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<int> to_int_list(const RawConfig& raw, const RawEntry& e, const std::string& key) {
    std::vector<int> out;
    for (const std::string& tok : split_list(e.value)) {
        int v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            raw.fail(e.line, key + ": cannot parse integer '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

Eigen::VectorXd to_vector(const RawConfig& raw, const RawEntry& e, const std::string& key,
                          int d) {
    const std::vector<double> v = to_double_list(raw, e, key);
    if (static_cast<int>(v.size()) != d)
        raw.fail(e.line, key + ": expected " + std::to_string(d) + " entries, got " +
                             std::to_string(v.size()));
    return Eigen::Map<const Eigen::VectorXd>(v.data(), d);
}

// mixing accepts "identity", "rotation:<degrees>" (d = 2 only) or d*d
// row-major entries; var0 accepts "identity", d diagonal entries or d*d
// row-major entries.
Eigen::MatrixXd to_mixing(const RawConfig& raw, const RawEntry& e, int d) {
    if (e.value == "identity") return {};
    if (e.value.rfind("rotation:", 0) == 0) {
        if (d != 2) raw.fail(e.line, "mixing: rotation form requires d = 2");
        const std::string deg_s = e.value.substr(9);
        double deg = 0.0;
        const auto res = std::from_chars(deg_s.data(), deg_s.data() + deg_s.size(), deg);
        if (res.ec != std::errc() || res.ptr != deg_s.data() + deg_s.size())
            raw.fail(e.line, "mixing: cannot parse rotation angle '" + deg_s + "'");
        const double a = deg * kPi / 180.0;
        Eigen::MatrixXd m(2, 2);
        m << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        return m;
    }
    const std::vector<double> v = to_double_list(raw, e, "mixing");
    if (static_cast<int>(v.size()) != d * d)
        raw.fail(e.line, "mixing: expected " + std::to_string(d * d) + " entries");
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i) * d + j];
    return m;
}

Eigen::MatrixXd to_var0(const RawConfig& raw, const RawEntry& e, int d) {
    if (e.value == "identity") return {};
    const std::vector<double> v = to_double_list(raw, e, "var0");
    if (static_cast<int>(v.size()) == d) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) m(i, i) = v[static_cast<std::size_t>(i)];
        return m;
    }
    if (static_cast<int>(v.size()) == d * d) {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i) * d + j];
        return m;
    }
    raw.fail(e.line, "var0: expected 'identity', " + std::to_string(d) + " or " +
                         std::to_string(d * d) + " entries");
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

std::string join_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v(i));
    }
    return out;
}

std::string join_matrix(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return "identity";
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (i + j) out += ",";
            out += format_double(m(i, j));
        }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

void build_echo(CliConfig& cfg) {
    auto& e = cfg.echo;
    e.clear();
    if (cfg.has_seed) e["seed"] = std::to_string(cfg.seed);
    e["n"] = std::to_string(cfg.n);
    e["model.d"] = std::to_string(cfg.model.d);
    e["model.beta1"] = join_vector(cfg.model.beta1);
    e["model.beta2"] = join_vector(cfg.model.beta2);
    e["model.pi0"] = format_double(cfg.model.pi0);
    e["model.alpha"] = format_double(cfg.model.error_law.alpha);
    e["model.sigma0"] = format_double(cfg.model.error_law.sigma0);
    e["model.kernel"] = cfg.model.error_law.kernel == ErrorKernel::Fgn ? "fgn" : "powerlaw";
    e["model.slowly_varying"] =
        cfg.model.error_law.slowly_varying == SlowlyVarying::One ? "one" : "logshift";
    e["model.thetas"] = join_doubles(cfg.model.regressor_law.thetas);
    e["model.mixing"] = join_matrix(cfg.model.regressor_law.mixing);
    e["model.var0"] = join_matrix(cfg.model.regressor_law.var0);
    e["fit.c"] = format_double(cfg.fit.c);
    e["fit.trim"] = format_double(cfg.fit.trim);
    e["fit.n_subsets"] = std::to_string(cfg.fit.n_subsets);
    e["fit.irls_max_iter"] = std::to_string(cfg.fit.irls_max_iter);
    e["fit.irls_tol"] = format_double(cfg.fit.irls_tol);
    e["fit.box_halfwidth"] = format_double(cfg.fit.box_halfwidth);
    e["fit.chunk"] = std::to_string(cfg.fit.chunk);
    e["study.kind"] = cfg.study.kind;
    e["study.ns"] = join_ints(cfg.study.ns);
    e["study.replicates"] = std::to_string(cfg.study.replicates);
    e["study.robust_n"] = std::to_string(cfg.study.robust_n);
    e["study.robust_replicates"] = std::to_string(cfg.study.robust_replicates);
    e["study.fraction"] = format_double(cfg.study.fraction);
    e["study.magnitude"] = format_double(cfg.study.magnitude);
    e["study.check_slopes"] = cfg.study.check_slopes ? "true" : "false";
    e["study.slope_tol_beta"] = format_double(cfg.study.slope_tol_beta);
    e["study.slope_tol_sigma"] = format_double(cfg.study.slope_tol_sigma);
    e["study.slope_tol_pi"] = format_double(cfg.study.slope_tol_pi);
    e["study.check_robustness"] = cfg.study.check_robustness ? "true" : "false";
    e["study.ls_ratio_min"] = format_double(cfg.study.ls_ratio_min);
    e["study.clean_ratio_max"] = format_double(cfg.study.clean_ratio_max);
}

}  // namespace

CliConfig parse_config_text(const std::string& text, const std::string& origin) {
    RawConfig raw = scan(text, origin);
    CliConfig cfg;

    if (auto e = raw.take("", "seed")) {
        cfg.seed = to_u64(raw, *e, "seed");
        cfg.has_seed = true;
    }
    if (auto e = raw.take("", "n")) {
        const long v = to_long(raw, *e, "n");
        if (v < 1) raw.fail(e->line, "n must be >= 1");
        cfg.n = static_cast<int>(v);
    }
    if (auto e = raw.take("", "threads")) {
        const long v = to_long(raw, *e, "threads");
        if (v < 0) raw.fail(e->line, "threads must be >= 0");
        cfg.threads = static_cast<int>(v);
    }

    int d = 1;
    if (auto e = raw.take("model", "d")) {
        const long v = to_long(raw, *e, "d");
        if (v < 1 || v > 64) raw.fail(e->line, "d must be in 1..64");
        d = static_cast<int>(v);
    }
    cfg.model.d = d;
    cfg.model.regressor_law.d = d;
    cfg.model.beta1 = Eigen::VectorXd::Zero(d);
    cfg.model.beta2 = Eigen::VectorXd::Constant(d, 2.0);
    cfg.model.error_law.sigma0 = 0.5;
    cfg.model.regressor_law.thetas.assign(static_cast<std::size_t>(d), 0.4);

    if (auto e = raw.take("model", "beta1")) cfg.model.beta1 = to_vector(raw, *e, "beta1", d);
    if (auto e = raw.take("model", "beta2")) cfg.model.beta2 = to_vector(raw, *e, "beta2", d);
    if (auto e = raw.take("model", "pi0")) cfg.model.pi0 = to_double(raw, *e, "pi0");
    if (auto e = raw.take("model", "alpha"))
        cfg.model.error_law.alpha = to_double(raw, *e, "alpha");
    if (auto e = raw.take("model", "sigma0"))
        cfg.model.error_law.sigma0 = to_double(raw, *e, "sigma0");
    if (auto e = raw.take("model", "kernel")) {
        if (e->value == "fgn")
            cfg.model.error_law.kernel = ErrorKernel::Fgn;
        else if (e->value == "powerlaw")
            cfg.model.error_law.kernel = ErrorKernel::PowerLaw;
        else
            raw.fail(e->line, "kernel: expected fgn or powerlaw, got '" + e->value + "'");
    }
    if (auto e = raw.take("model", "slowly_varying")) {
        if (e->value == "one")
            cfg.model.error_law.slowly_varying = SlowlyVarying::One;
        else if (e->value == "logshift")
            cfg.model.error_law.slowly_varying = SlowlyVarying::LogShift;
        else
            raw.fail(e->line, "slowly_varying: expected one or logshift, got '" + e->value + "'");
    }
    if (auto e = raw.take("model", "thetas")) {
        cfg.model.regressor_law.thetas = to_double_list(raw, *e, "thetas");
        if (static_cast<int>(cfg.model.regressor_law.thetas.size()) != d)
            raw.fail(e->line, "thetas: expected " + std::to_string(d) + " entries");
    }
    if (auto e = raw.take("model", "mixing"))
        cfg.model.regressor_law.mixing = to_mixing(raw, *e, d);
    if (auto e = raw.take("model", "var0")) cfg.model.regressor_law.var0 = to_var0(raw, *e, d);

    if (auto e = raw.take("fit", "c")) cfg.fit.c = to_double(raw, *e, "c");
    if (auto e = raw.take("fit", "trim")) cfg.fit.trim = to_double(raw, *e, "trim");
    if (auto e = raw.take("fit", "n_subsets"))
        cfg.fit.n_subsets = static_cast<int>(to_long(raw, *e, "n_subsets"));
    if (auto e = raw.take("fit", "irls_max_iter"))
        cfg.fit.irls_max_iter = static_cast<int>(to_long(raw, *e, "irls_max_iter"));
    if (auto e = raw.take("fit", "irls_tol")) cfg.fit.irls_tol = to_double(raw, *e, "irls_tol");
    if (auto e = raw.take("fit", "box_halfwidth"))
        cfg.fit.box_halfwidth = to_double(raw, *e, "box_halfwidth");
    if (auto e = raw.take("fit", "chunk"))
        cfg.fit.chunk = static_cast<int>(to_long(raw, *e, "chunk"));

    if (auto e = raw.take("study", "kind")) {
        if (e->value != "rate" && e->value != "robustness" && e->value != "both")
            raw.fail(e->line, "kind: expected rate, robustness or both, got '" + e->value + "'");
        cfg.study.kind = e->value;
    }
    if (auto e = raw.take("study", "ns")) {
        cfg.study.ns = to_int_list(raw, *e, "ns");
        if (cfg.study.ns.empty()) raw.fail(e->line, "ns: must be nonempty");
        for (int v : cfg.study.ns)
            if (v < 8) raw.fail(e->line, "ns: sample sizes must be >= 8");
    }
    if (auto e = raw.take("study", "replicates"))
        cfg.study.replicates = static_cast<int>(to_long(raw, *e, "replicates"));
    if (auto e = raw.take("study", "robust_n"))
        cfg.study.robust_n = static_cast<int>(to_long(raw, *e, "robust_n"));
    if (auto e = raw.take("study", "robust_replicates"))
        cfg.study.robust_replicates = static_cast<int>(to_long(raw, *e, "robust_replicates"));
    if (auto e = raw.take("study", "fraction"))
        cfg.study.fraction = to_double(raw, *e, "fraction");
    if (auto e = raw.take("study", "magnitude"))
        cfg.study.magnitude = to_double(raw, *e, "magnitude");
    if (auto e = raw.take("study", "check_slopes"))
        cfg.study.check_slopes = to_bool(raw, *e, "check_slopes");
    if (auto e = raw.take("study", "slope_tol_beta"))
        cfg.study.slope_tol_beta = to_double(raw, *e, "slope_tol_beta");
    if (auto e = raw.take("study", "slope_tol_sigma"))
        cfg.study.slope_tol_sigma = to_double(raw, *e, "slope_tol_sigma");
    if (auto e = raw.take("study", "slope_tol_pi"))
        cfg.study.slope_tol_pi = to_double(raw, *e, "slope_tol_pi");
    if (auto e = raw.take("study", "check_robustness"))
        cfg.study.check_robustness = to_bool(raw, *e, "check_robustness");
    if (auto e = raw.take("study", "ls_ratio_min"))
        cfg.study.ls_ratio_min = to_double(raw, *e, "ls_ratio_min");
    if (auto e = raw.take("study", "clean_ratio_max"))
        cfg.study.clean_ratio_max = to_double(raw, *e, "clean_ratio_max");

    raw.reject_leftovers();
    build_echo(cfg);
    return cfg;
}

CliConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

CliConfig default_config() { return parse_config_text("", "<default>"); }

void set_echo(CliConfig& cfg, const std::string& key, const std::string& value) {
    cfg.echo[key] = value;
}

}  // namespace sbreak

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sbreak/estimator.hpp"
#include "sbreak/procgen.hpp"

namespace sbreak {

// [study] section: Monte Carlo study shape plus optional pass/fail gates.
// Gate tolerances default to the verification bands used by the test suite.
struct StudyConfig {
    std::string kind = "rate";  // "rate", "robustness" or "both"
    std::vector<int> ns = {512, 1024, 2048, 4096};
    int replicates = 200;
    int robust_n = 1000;
    int robust_replicates = 50;
    double fraction = 0.1;
    double magnitude = 100.0;
    bool check_slopes = false;
    double slope_tol_beta = 0.25;
    double slope_tol_sigma = 0.25;
    double slope_tol_pi = 0.35;
    bool check_robustness = false;
    double ls_ratio_min = 10.0;
    double clean_ratio_max = 3.0;
};

// Parsed INI-style run configuration.  Unknown sections, unknown keys and
// duplicate keys are hard errors naming the offending line; defaults fill
// whatever the file leaves out.  `echo` holds every effective key as a
// string, sorted; it is embedded verbatim in output reports.  The worker
// thread count is deliberately not part of the echo: results are independent
// of it, and reports must not differ across `--threads` values.
struct CliConfig {
    ModelSpec model;
    FitConfig fit;
    StudyConfig study;
    std::uint64_t seed = 0;
    bool has_seed = false;
    int n = 1024;  // top-level sample size used by dataset synthesis
    int threads = 0;  // 0 = pick the hardware concurrency at run time
    std::map<std::string, std::string> echo;
};

// Parses `text` as a config file; `origin` names the source in errors.
CliConfig parse_config_text(const std::string& text, const std::string& origin);

// Reads and parses the file at `path` (IoError when unreadable).
CliConfig parse_config_file(const std::string& path);

// A config with every key at its default: the d=1 two-phase model with
// beta 0 -> 2 at pi0 = 1/2, sigma0 = 1/2, fGn memory alpha = theta = 0.4.
CliConfig default_config();

// Rewrites the echo entry for `key` (used when flags override file values).
void set_echo(CliConfig& cfg, const std::string& key, const std::string& value);

}  // namespace sbreak

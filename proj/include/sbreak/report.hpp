#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sbreak/config.hpp"
#include "sbreak/estimator.hpp"
#include "sbreak/experiments.hpp"

namespace sbreak {

// JSON report assembly.  Keys serialize sorted, numbers in shortest
// round-trip form, non-finite values as null; every report carries the
// effective config echo and the tool version, so identical runs give
// identical bytes.

// Truth loaded from a generation sidecar, for error-vs-truth report fields.
struct TruthInfo {
    ModelSpec model;
    int n = 0;
    std::uint64_t seed = 0;
    int true_k = -1;
};

std::string fit_report_json(const FitResult& fit, const Dataset& ds, const CliConfig& cfg,
                            const std::optional<TruthInfo>& truth);

std::string rate_report_json(const RateReport& rep, const CliConfig& cfg);

std::string robustness_report_json(const RobustnessReport& rep, const CliConfig& cfg);

// Kernel constants: c, K, J_1..J_8, Hermite rank and the rate constant for
// the config's (alpha, thetas).
std::string rho_report_json(const CliConfig& cfg);

// Generation sidecar: the generating model plus (n, seed, true_k).
std::string truth_sidecar_json(const ModelSpec& model, int n, std::uint64_t seed, int true_k,
                               const CliConfig& cfg);

// Parses a sidecar produced by truth_sidecar_json (ConfigError on anything
// structurally off).
TruthInfo truth_from_json(const std::string& text);

}  // namespace sbreak

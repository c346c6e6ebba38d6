#pragma once

#include <string>
#include <vector>

#include "sbreak/experiments.hpp"

namespace sbreak {

// Minimal deterministic SVG line charts: fixed viewport, inline styling, no
// timestamps or external references, so identical inputs give identical
// bytes.

// Joint-scale profile over the admissible splits, with the selected split
// marked.  Non-finite profile entries (degenerate candidates) are skipped.
void write_profile_svg(const std::string& path, int k_min, const std::vector<double>& profile,
                       int k_hat);

// Log-log error-vs-n chart for one metric ("beta", "sigma" or "pi"): summary
// points, the fitted slope on the preferred basis, and the theoretical slope
// anchored at the first point.
void write_rate_svg(const std::string& path, const RateReport& report, const std::string& metric);

}  // namespace sbreak

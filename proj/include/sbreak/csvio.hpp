#pragma once

#include <string>
#include <vector>

#include "sbreak/experiments.hpp"
#include "sbreak/procgen.hpp"

namespace sbreak {

// Shortest round-trip decimal form (std::to_chars), locale-independent.
std::string format_double(double v);

// Dataset table: header `t,y,x1,...,xd`, rows t = 1..n, LF line endings.
void write_dataset_csv(const std::string& path, const Dataset& ds);

// Strict reader for the same format.  Malformed input (wrong header, row
// length mismatch, unparsable or non-finite values, out-of-order t) raises
// IoError naming the offending line.
Dataset read_dataset_csv(const std::string& path);

// Profile table: header `k,s_n`, one row per admissible split.
void write_profile_csv(const std::string& path, int k_min, const std::vector<double>& profile);

// Rate-study table: header `n,metric,median,mean,stderr`.
void write_rate_csv(const std::string& path, const RateReport& report);

}  // namespace sbreak

#pragma once

#include <stdexcept>
#include <string>

namespace sbreak {

// Config file or command-line usage problems. Exit code 2 at the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// The requested autocovariance sequence is not positive semidefinite, so no
// Gaussian process with that law exists. Exit code 2 at the CLI.
class CovarianceNotPsdError : public std::runtime_error {
public:
    explicit CovarianceNotPsdError(const std::string& msg) : std::runtime_error(msg) {}
};

// Every candidate split produced a rank-deficient weighted design matrix.
// Exit code 3 at the CLI.
class DegenerateSegmentError : public std::runtime_error {
public:
    explicit DegenerateSegmentError(const std::string& msg) : std::runtime_error(msg) {}
};

// All Hermite coefficients up to the requested order are numerically zero.
class RankNotFoundError : public std::runtime_error {
public:
    explicit RankNotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

// File read/write failures, malformed CSV rows. Exit code 4 at the CLI.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}

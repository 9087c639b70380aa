#pragma once

#include <stdexcept>
#include <string>

namespace htpca {

// Invalid parameters, configuration, or file contents. CLI maps this to exit code 2.
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

struct config_error : domain_error {
    explicit config_error(const std::string& what) : domain_error(what) {}
};

struct parse_error : domain_error {
    explicit parse_error(const std::string& what) : domain_error(what) {}
};

// Numerical failure on valid inputs (degenerate samples, non-convergence,
// indefinite matrices). CLI maps this to exit code 3.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

struct data_error : numerical_error {
    explicit data_error(const std::string& what) : numerical_error(what) {}
};

} // namespace htpca

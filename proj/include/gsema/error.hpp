#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gsema {

/**
 * Error taxonomy shared by every stage of the pipeline. The CLI maps these
 * onto process exit codes: configuration problems exit 2, malformed or
 * inconsistent input data exits 3, numeric degeneracy discovered while
 * computing exits 4.
 */
enum class errc {
    config_error,
    invalid_kernel,
    parse_error,
    duplicate_gene,
    duplicate_set,
    missing_label,
    degenerate_design,
    empty_input,
    io_error,
    domain_error,
    degenerate_variance,
    no_pathways,
};

inline const char* errc_name(errc code) {
    switch (code) {
        case errc::config_error: return "config error";
        case errc::invalid_kernel: return "invalid kernel";
        case errc::parse_error: return "parse error";
        case errc::duplicate_gene: return "duplicate gene";
        case errc::duplicate_set: return "duplicate set";
        case errc::missing_label: return "missing label";
        case errc::degenerate_design: return "degenerate design";
        case errc::empty_input: return "empty input";
        case errc::io_error: return "io error";
        case errc::domain_error: return "domain error";
        case errc::degenerate_variance: return "degenerate variance";
        case errc::no_pathways: return "no pathways";
    }
    return "unknown error";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace gsema

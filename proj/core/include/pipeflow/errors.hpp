#pragma once

#include <stdexcept>
#include <string>

namespace pipeflow {

/// Machine-readable failure categories. CLI exit codes and test assertions
/// key off these rather than message text.
enum class Errc {
    disconnected_graph,
    empty_slack_set,
    duplicate_edge,
    non_positive_parameter,
    non_positive_epsilon,
    vertex_mismatch,
    non_positive_density,
    density_cavitation,
    non_convergence,
    singular_jacobian,
    unlifted_scenario,
    missing_model,
    step_failure,
    grid_mismatch,
    hypothesis_violated,
    no_crossing,
    envelope_inverted,
    sandwich_violated,
    path_not_found,
    parse_error,
    io_error,
    bad_argument,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace pipeflow

#pragma once

#include <stdexcept>
#include <string>

namespace qsd {

/// A density matrix or Bloch vector outside the physical set.
struct InvalidState : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent or out-of-range parameters (mismatched dt, bad fidelities, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An explicit integrator left the set of unit-trace matrices.
struct NumericalBlowup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the file and line.
struct ParseError : std::runtime_error {
    ParseError(const std::string &file, size_t line, const std::string &what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), file(file), line(line) {
    }
    std::string file;
    size_t line;
};

}  // namespace qsd

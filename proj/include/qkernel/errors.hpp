#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qk {

/// Circuit/state shape problems: qubit counts that do not match, indices out of range.
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation's precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Request would allocate beyond the dense-simulation guard.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Combination of options that has no defined meaning (e.g. a sine data map on three qubits).
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The transpiler cannot express a gate in the requested instruction set.
class UnsupportedIsaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Backend rejection: a job carries more circuits than the profile allows.
class MaxJobSizeError : public std::runtime_error {
public:
    MaxJobSizeError(std::size_t circuits, std::size_t limit)
        : std::runtime_error("job contains " + std::to_string(circuits) +
                             " circuits, which exceeds the maximum allowed job size of " +
                             std::to_string(limit)),
          circuits_(circuits), limit_(limit) {}

    std::size_t circuits() const noexcept { return circuits_; }
    std::size_t limit() const noexcept { return limit_; }

private:
    std::size_t circuits_;
    std::size_t limit_;
};

/// Backend rejection: a submitted circuit uses a gate outside the backend ISA.
class IsaViolationError : public std::runtime_error {
public:
    IsaViolationError(const std::string& gate, const std::string& backend)
        : std::runtime_error("gate '" + gate + "' is not in the instruction set of backend '" +
                             backend + "'; transpile the circuit before submission"),
          gate_(gate) {}

    const std::string& gate() const noexcept { return gate_; }

private:
    std::string gate_;
};

/// Collect was requested while some jobs are not Done.
class IncompleteSessionError : public std::runtime_error {
public:
    explicit IncompleteSessionError(std::vector<std::string> pending)
        : std::runtime_error(make_message(pending)), pending_(std::move(pending)) {}

    const std::vector<std::string>& pending() const noexcept { return pending_; }

private:
    static std::string make_message(const std::vector<std::string>& ids) {
        std::string msg = "session incomplete; jobs not done:";
        for (const auto& id : ids) {
            msg += ' ';
            msg += id;
        }
        return msg;
    }

    std::vector<std::string> pending_;
};

/// Malformed input files (CSV/JSON) or I/O failures.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qk

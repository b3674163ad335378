#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rssmlp {

// Base error carrying a short machine-readable code next to the human message.
// The CLI prints "error code=<code> msg=..." and maps codes to exit status.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Caller broke a documented precondition (shape mismatch, bad argument, ...).
class ContractViolation : public Error {
public:
    explicit ContractViolation(const std::string& msg) : Error("contract", msg) {}
};

// Malformed external input (CSV cells, JSON documents, model files).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error("parse", msg) {}
};

// Requested configuration cannot be satisfied by the data (e.g. K*K > pool).
class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& msg) : Error("infeasible", msg) {}
};

// Input is structurally fine but outside a formula's domain
// (constant vector correlation, out-of-range probability, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("domain", msg) {}
};

// Filesystem problems: missing file, unwritable output.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

// Non-finite values produced where finite ones are guaranteed.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error("numeric", msg) {}
};

// Training diverged (non-finite loss); message carries epoch/batch diagnostics.
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error("training", msg) {}
};

}  // namespace rssmlp

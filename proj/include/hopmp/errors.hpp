#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hopmp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- expressions ----------------------------------------------------------

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, std::string expected, const std::string& detail)
        : Error("syntax error at " + std::to_string(position) + ": " + detail +
                " (expected " + expected + ")"),
          position_(position),
          expected_(std::move(expected)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class UnknownSymbol : public Error {
public:
    explicit UnknownSymbol(const std::string& name) : Error("unknown symbol '" + name + "'") {}
};

class DerivativeOrderTooHigh : public Error {
public:
    explicit DerivativeOrderTooHigh(const std::string& name)
        : Error("derivative order too high for '" + name + "'") {}
};

class MissingBinding : public Error {
public:
    explicit MissingBinding(const std::string& name) : Error("no value bound for '" + name + "'") {}
};

class NonFiniteResult : public Error {
public:
    using Error::Error;
};

// ---- controls -------------------------------------------------------------

class OutOfDomain : public Error {
public:
    using Error::Error;
};

class InvalidWidth : public Error {
public:
    using Error::Error;
};

// ---- integration ----------------------------------------------------------

class NonFiniteState : public Error {
public:
    NonFiniteState(double t, const std::string& detail)
        : Error("non-finite state at t=" + std::to_string(t) + ": " + detail), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

class StepTooCoarse : public Error {
public:
    StepTooCoarse(double estimate, double tolerance)
        : Error("Richardson estimate " + std::to_string(estimate) + " exceeds tolerance " +
                std::to_string(tolerance)),
          estimate_(estimate) {}
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

class MissingJets : public Error {
public:
    using Error::Error;
};

class GridMismatch : public Error {
public:
    using Error::Error;
};

// ---- optimisation / oracles -----------------------------------------------

struct TrialRecord {
    double epsilon = 0.0;
    double cost = 0.0;
    double drop = 0.0;
    double required = 0.0;
};

class StepFailed : public Error {
public:
    StepFailed(const std::string& detail, std::vector<TrialRecord> trials)
        : Error("needle step failed: " + detail), trials_(std::move(trials)) {}
    const std::vector<TrialRecord>& trials() const noexcept { return trials_; }

private:
    std::vector<TrialRecord> trials_;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

// ---- problem files --------------------------------------------------------

class SpecSyntaxError : public Error {
public:
    SpecSyntaxError(std::size_t line, std::size_t column, const std::string& detail)
        : Error("spec:" + std::to_string(line) + ":" + std::to_string(column) + ": " + detail),
          line_(line),
          column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class ValidationFailed : public Error {
public:
    explicit ValidationFailed(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "validation failed";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

}  // namespace hopmp

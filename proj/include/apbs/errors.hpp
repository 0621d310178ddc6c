// errors.hpp: exception hierarchy shared by all modules.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apbs {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied specification (model file, scenario block, arguments).
class SpecError : public Error {
public:
    using Error::Error;
};

// Operation requested on a model of the wrong form (tight-binding vs effective).
class ModelFormError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class AmbiguityError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class TrackingError : public Error {
public:
    TrackingError(const std::string& what, double flux)
        : Error(what + " (flux " + std::to_string(flux) + ")"), flux_(flux) {}
    double flux() const noexcept { return flux_; }

private:
    double flux_;
};

class FitDomainError : public Error {
public:
    using Error::Error;
};

class LeakageError : public Error {
public:
    using Error::Error;
};

// Raised by a pipeline stage; `stage` names the failing step.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace apbs

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfke {

/// A run was stopped because the particle state became unusable
/// (non-finite position, weight overflow). Maps to CLI exit status 3.
class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& what, std::size_t particle, std::size_t step)
        : std::runtime_error(what), particle_(particle), step_(step) {}

    std::size_t particle() const noexcept { return particle_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t particle_;
    std::size_t step_;
};

/// A grid solver refused a time step it cannot integrate stably.
/// Maps to CLI exit status 4.
class OracleInstability : public std::runtime_error {
public:
    OracleInstability(const std::string& what, double suggested_dt)
        : std::runtime_error(what), suggested_dt_(suggested_dt) {}

    double suggested_dt() const noexcept { return suggested_dt_; }

private:
    double suggested_dt_;
};

/// Invalid or incomplete run configuration. Maps to CLI exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mfke

#pragma once

#include <stdexcept>
#include <string>

namespace ohprl {

/// Invalid configuration value or combination (bad layer spec, mode conflict, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions do not match what an operation expects.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A NaN or Inf showed up; carries the name of the stage that produced it.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(std::string stage)
        : std::runtime_error("non-finite value in stage '" + stage + "'"), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Environment used out of protocol (e.g. step after a terminal result).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data rejected (demo without success, n_episodes == 0, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampling from an empty buffer.
class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint read/write or export failure.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ohprl

#pragma once

#include <stdexcept>
#include <string>

namespace elmlink {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (instability, singular system, lost sync).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyncError : public SimulationError {
public:
    using SimulationError::SimulationError;
};

class InstabilityError : public SimulationError {
public:
    using SimulationError::SimulationError;
};

}  // namespace elmlink

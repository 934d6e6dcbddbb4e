#pragma once

#include <stdexcept>
#include <string>

namespace multsl {

// Base class for all library errors; subtypes map to distinct CLI exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatch.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid configuration value (non-divisible pooling dims, bad ranges, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Wire-format decode failure (bad magic, truncation, header mismatch).
struct DecodeError : Error {
    using Error::Error;
};

// Split-protocol sequencing violation (backward before forward, aborted step).
struct ProtocolError : Error {
    using Error::Error;
};

// NaN/Inf produced by a numeric pass.
struct NumericError : Error {
    using Error::Error;
};

// Power trace too short for the requested step count, or all-idle timeline.
struct TraceError : Error {
    using Error::Error;
};

// Undefined metric (empty record set) or degenerate privacy leakage.
struct MetricError : Error {
    using Error::Error;
};

// File I/O failure on datasets, checkpoints or reports.
struct IoError : Error {
    using Error::Error;
};

}  // namespace multsl

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sslvit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension mismatches.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument values (temperatures, fractions, k, ...).
struct ParamError : Error {
    using Error::Error;
};

// NaN/Inf or diverged computation.
struct NumericError : Error {
    using Error::Error;
};

// Misuse of stateful machinery (backward twice, missing grads, ...).
struct StateError : Error {
    using Error::Error;
};

// Bad run configuration or dataset setup.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input file; carries the offending byte offset.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t offset)
        : Error(msg + " (byte " + std::to_string(offset) + ")"), byte_offset(offset) {}
    std::size_t byte_offset;
};

// Checkpoint file rejected; kind distinguishes the failure.
struct CheckpointError : Error {
    enum class Kind { BadMagic, BadVersion, Truncated, ChecksumMismatch, Malformed };
    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
    Kind kind;
};

// Dataset manifest inconsistencies.
struct ManifestError : Error {
    using Error::Error;
};

}  // namespace sslvit

#pragma once

#include <stdexcept>
#include <string>

namespace mim {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimensions do not line up (matmul widths, conv input too short, ...).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad input data: non-finite values, zero-variance region, ragged CSV rows.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration: infeasible fold spec, rho >= 1, patience >= epochs.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File problems: missing manifest entry, checkpoint version/checksum mismatch.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Numerical breakdown at runtime: NaN gradients, non-finite loss.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// API misuse: backward on a non-scalar, pooling an empty graph.
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

} // namespace mim

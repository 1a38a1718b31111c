#pragma once

#include <stdexcept>
#include <string>

namespace gradid {

// Exit codes the CLI maps each error class onto.
enum class ErrorCode : int {
    generic = 1,
    config = 2,
    io = 3,
    format = 4,
    numeric = 5,
    metric = 6,
    training = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const char* kind, const std::string& what)
        : std::runtime_error(what), code_(code), kind_(kind) {}

    ErrorCode code() const noexcept { return code_; }
    // Short machine-readable class name, used in JSON error records.
    const char* kind() const noexcept { return kind_; }

private:
    ErrorCode code_;
    const char* kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorCode::numeric, "dimension", what) {}
};

class ValueError : public Error {
public:
    explicit ValueError(const std::string& what) : Error(ErrorCode::numeric, "value", what) {}
};

class LabelError : public Error {
public:
    explicit LabelError(const std::string& what) : Error(ErrorCode::numeric, "label", what) {}
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorCode::numeric, "parameter", what) {}
};

class InsufficientPointsError : public Error {
public:
    explicit InsufficientPointsError(const std::string& what)
        : Error(ErrorCode::numeric, "insufficient_points", what) {}
};

class CalibrationError : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error(ErrorCode::numeric, "calibration", what) {}
};

class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& what) : Error(ErrorCode::training, "training", what) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& what) : Error(ErrorCode::metric, "metric", what) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(ErrorCode::format, "format", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::io, "io", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::config, "config", what) {}
};

}  // namespace gradid

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace egocl {

/// Scalar type used by the experiment pipeline. The neural engine itself is
/// templated and is instantiated for both float and double; experiments run
/// in float for throughput.
using Real = float;

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and emit a machine-readable record.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, long line, const std::string& message)
        : Error("parse", file + ":" + std::to_string(line) + ": " + message),
          line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

class IngestError : public Error {
public:
    explicit IngestError(const std::string& message) : Error("ingest", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class MetricError : public Error {
public:
    explicit MetricError(const std::string& message) : Error("metric", message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace egocl

#pragma once

#include <stdexcept>
#include <string>

namespace rehab {

// Base class for every error thrown by this library. Messages are prefixed
// with the subsystem that raised them so CLI output stays attributable.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io: " + msg) {}
};

struct SchemaError : Error {
    SchemaError(std::size_t line, const std::string& reason)
        : Error("schema: line " + std::to_string(line) + ": " + reason),
          line(line), reason(reason) {}
    std::size_t line;
    std::string reason;
};

struct UnknownSubject : Error {
    explicit UnknownSubject(const std::string& id)
        : Error("dataset: unknown subject '" + id + "'") {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error("domain: " + msg) {}
};

struct DegenerateGeometry : Error {
    explicit DegenerateGeometry(const std::string& msg)
        : Error("geometry: " + msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg)
        : Error("length mismatch: " + msg) {}
};

struct NonMonotoneTime : Error {
    explicit NonMonotoneTime(const std::string& msg)
        : Error("time series: " + msg) {}
};

struct EmptyTrainingSet : Error {
    EmptyTrainingSet() : Error("normalization: empty training set") {}
    explicit EmptyTrainingSet(const std::string& msg)
        : Error("empty training set: " + msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg)
        : Error("dimension mismatch: " + msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg)
        : Error("shape mismatch: " + msg) {}
};

struct DegenerateLabels : Error {
    DegenerateLabels() : Error("training: only one class present in labels") {}
};

struct IllegalAction : Error {
    explicit IllegalAction(const std::string& msg)
        : Error("selector: illegal action: " + msg) {}
};

struct InsufficientNormals : Error {
    explicit InsufficientNormals(std::size_t got)
        : Error("feedback: need at least 3 normal repetitions, got " +
                std::to_string(got)) {}
};

struct NameOrderMismatch : Error {
    explicit NameOrderMismatch(const std::string& msg)
        : Error("feature names: " + msg) {}
};

struct MissingTemplate : Error {
    explicit MissingTemplate(const std::string& family)
        : Error("feedback: no message template for family '" + family + "'") {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

}  // namespace rehab

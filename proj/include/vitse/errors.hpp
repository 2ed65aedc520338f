#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vitse {

// Shape/dimension mismatch between tensors.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated operation contract (non-scalar loss, empty dataset, bad target row, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration (bad key, inconsistent architecture fields).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data; carries the 1-based line number when known.
struct ParseError : std::runtime_error {
    int64_t line = 0;
    ParseError(int64_t line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint file problems, one kind per failure mode.
struct CheckpointError : std::runtime_error {
    enum class Kind { BadMagic, BadVersion, Truncated, MissingTensor, UnexpectedTensor, BadShape, BadDtype };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Non-finite value produced by a forward op (debug builds only).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace vitse

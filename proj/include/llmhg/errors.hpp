#pragma once

#include <stdexcept>
#include <string>

namespace llmhg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

struct EmptyDataset : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct InternalInvariantViolation : Error {
    using Error::Error;
};

struct EmptyHistory : Error {
    using Error::Error;
};

struct LlmParseError : Error {
    using Error::Error;
};

struct FixtureMiss : Error {
    using Error::Error;
};

struct InvalidUsage : Error {
    using Error::Error;
};

struct DegenerateHypergraph : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct UnknownItem : Error {
    using Error::Error;
};

struct TrainingDiverged : Error {
    TrainingDiverged(const std::string& msg, int epoch_idx)
        : Error(msg + " (epoch " + std::to_string(epoch_idx) + ")"), epoch(epoch_idx) {}
    int epoch;
};

}  // namespace llmhg

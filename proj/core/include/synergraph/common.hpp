#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace synergraph {

/// Dense row-major matrix used for embeddings, features and gradients.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using Index = std::int64_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

/// Binary file could not be loaded (bad magic, wrong shape, non-finite data).
class LoadError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A numeric precondition was violated (zero norm, negative weight, NaN loss).
class NumericError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

enum class Modality { visual, textual };

inline const char* to_string(Modality m) {
    return m == Modality::visual ? "visual" : "textual";
}

}  // namespace synergraph

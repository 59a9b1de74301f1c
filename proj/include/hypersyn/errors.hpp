#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace hypersyn {

/// Raised when a caller breaks an operation's preconditions (shape, curvature,
/// empty input, ...). Programming error, not a data problem.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class ShapeError : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

/// Corpus or file validation failure. Carries enough context to point a user
/// at the offending record.
class DataError : public std::runtime_error {
public:
    DataError(std::string file, std::size_t line, std::string field, const std::string& message)
        : std::runtime_error(format(file, line, field, message)),
          file_(std::move(file)),
          line_(line),
          field_(std::move(field)) {}

    explicit DataError(const std::string& message) : std::runtime_error(message) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string format(const std::string& file, std::size_t line, const std::string& field,
                              const std::string& message) {
        std::string out = file;
        if (line > 0) out += ":" + std::to_string(line);
        if (!field.empty()) out += " [" + field + "]";
        return out + ": " + message;
    }

    std::string file_;
    std::size_t line_ = 0;
    std::string field_;
};

/// NaN/Inf encountered in a loss, gradient, or parameter update.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hypersyn

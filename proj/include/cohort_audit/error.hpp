#ifndef COHORT_AUDIT_ERROR_HPP
#define COHORT_AUDIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cohort_audit {

/// Failure category; each maps to a distinct CLI exit code.
enum class ErrorKind { Config, Data, Numeric };

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numeric: return 4;
    }
    return 1;
}

/// Base error carrying the originating module name.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& message)
        : std::runtime_error(module + ": " + message), kind_(kind), module_(std::move(module)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string module, const std::string& message)
        : Error(ErrorKind::Config, std::move(module), message) {}
};

class DataError : public Error {
public:
    DataError(std::string module, const std::string& message)
        : Error(ErrorKind::Data, std::move(module), message) {}
};

class NumericError : public Error {
public:
    NumericError(std::string module, const std::string& message)
        : Error(ErrorKind::Numeric, std::move(module), message) {}
};

/// Parse failure with a location (row/column for tables, offset for expressions).
class ParseError : public DataError {
public:
    ParseError(std::string module, const std::string& message, std::size_t position)
        : DataError(std::move(module), message), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

} // namespace cohort_audit

#endif

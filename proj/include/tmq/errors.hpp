#pragma once

#include <stdexcept>
#include <string>

namespace tmq {

// Invalid argument, configuration field or schedule. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ParseError : public ConfigError {
public:
    ParseError(int line, int column, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Exit code 3.
class FitError : public std::runtime_error {
public:
    enum class Kind { NonConvergence, SingularNormalMatrix, DegenerateProfile, BadInput };

    FitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tmq

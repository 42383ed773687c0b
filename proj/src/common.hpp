#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pb {

inline constexpr const char* kToolkitVersion = "perturbench 0.1.0";

// Error categories map 1:1 onto the CLI exit codes so that scripts can
// dispatch on the process status alone.
enum class ErrorKind : int {
    Usage = 64,
    Config = 65,
    Format = 66,
    Numeric = 70,
    Io = 74,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(ErrorKind::Usage, msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(ErrorKind::Format, msg) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorKind::Numeric, msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::Io, msg) {}
};

} // namespace pb

#pragma once

#include <stdexcept>
#include <string>

namespace sbr {

/// Process exit codes used by the command line tool.
enum class ExitCode : int {
    Ok = 0,
    Config = 2,
    Io = 3,
    Numerical = 4,
};

/// Base for all solver errors; carries the exit code the CLI should report.
class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Invalid configuration, malformed input data or a failed precondition.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ExitCode::Config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ExitCode::Io, what) {}
};

/// Overflow, non-finite intermediates or a non-convergent series.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::Numerical, what) {}
};

}  // namespace sbr

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pod {

/// Violated precondition of a library call (bad argument, out-of-bounds placement, ...).
class ContractError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A file or directory could not be read.
class LoadError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed label file; carries the offending file and 1-based line number.
class ParseError : public std::runtime_error
{
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line)
    {
    }

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Training produced a non-finite loss.
class DivergedError : public std::runtime_error
{
public:
    DivergedError(int epoch, int batch, const std::string& what)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch) + ": " + what),
          epoch_(epoch),
          batch_(batch)
    {
    }

    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

/// Non-finite model output at inference or attack time.
class EvalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error
{
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(field)
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace pod

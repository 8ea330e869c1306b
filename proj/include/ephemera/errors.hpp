#pragma once

#include <stdexcept>
#include <string>

namespace ephemera {

/// Input violates a documented contract (bad file content, bad request, bad argument).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A line-oriented input could not be parsed. Carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& detail)
        : ValidationError("line " + std::to_string(line) + ": " + detail),
          line_(line),
          detail_(detail) {}
    /// Same error located in a file: "path:line: detail".
    ParseError(const std::string& path, const ParseError& inner)
        : ValidationError(path + ":" + std::to_string(inner.line()) + ": " + inner.detail()),
          line_(inner.line()),
          detail_(inner.detail()) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

/// Filesystem read/write failure.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Unknown session id (maps to HTTP 404).
class NotFoundError : public std::runtime_error {
public:
    explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ephemera

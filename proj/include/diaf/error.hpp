#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diaf {

/// Malformed Matrix Market input; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line)
    {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class UnsupportedFormat : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No perfect row/column matching exists.
class StructurallySingular : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A diagonal block of a block-triangular factor is singular.
class SingularBlock : public std::runtime_error {
public:
    SingularBlock(std::size_t block, const std::string& what)
        : std::runtime_error(what), block_(block)
    {}
    std::size_t block() const { return block_; }

private:
    std::size_t block_;
};

class NumericalError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace diaf

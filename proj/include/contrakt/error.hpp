#pragma once

#include <stdexcept>
#include <string>

namespace contrakt {

/// Base error type for everything this library throws on invalid input
/// or failed numerical preconditions.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse failure in an expression, system file or network file.
/// Carries a 1-based line/column of the offending token.
struct ParseError : Error {
    ParseError(const std::string& message, int line_, int column_)
        : Error(message + " (line " + std::to_string(line_) + ", column " +
                std::to_string(column_) + ")"),
          line(line_),
          column(column_) {}

    int line;
    int column;
};

}  // namespace contrakt

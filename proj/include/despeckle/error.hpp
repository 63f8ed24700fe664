#pragma once

#include <stdexcept>
#include <string>

namespace despeckle {

// Precondition violated by the caller (bad mode index, rank out of bounds,
// invalid configuration, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data rejected: non-finite entries, degenerate regions, mismatched
// shapes coming from files.
class InvalidInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A factorization failed to converge or produced non-finite output.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
    io,               // cannot open / read / write
    bad_magic,
    bad_version,
    bad_element_type,
    bad_header,       // zero dims, unknown model kind or norm code, ...
    truncated,        // fewer bytes than the header promises
    trailing_bytes,   // more bytes than the header promises
    crc_mismatch,
    inconsistent,     // ranks vs. payload, stored CR vs. recomputed CR
    parse,            // text formats
};

const char* to_string(FormatErrorKind kind) noexcept;

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

} // namespace despeckle

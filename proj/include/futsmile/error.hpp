#pragma once

#include <stdexcept>
#include <string>

namespace futsmile {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    io,             ///< file missing or unreadable
    parse,          ///< malformed input text
    invalid_input,  ///< value violates a domain invariant
    date_order,     ///< contract calendar dates out of order
    out_of_range,   ///< query outside the supported domain (extrapolation, horizon)
    arbitrage,      ///< inputs imply negative densities or prices outside no-arbitrage bands
    numerical,      ///< solver breakdown
    not_converged,  ///< iteration budget exhausted
    schema,         ///< serialized document does not match the expected schema
    unsupported,    ///< request type not supported
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace futsmile

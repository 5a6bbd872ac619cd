#include "futsmile/error.hpp"

namespace futsmile {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::io: return "io";
        case ErrorCode::parse: return "parse";
        case ErrorCode::invalid_input: return "invalid_input";
        case ErrorCode::date_order: return "date_order";
        case ErrorCode::out_of_range: return "out_of_range";
        case ErrorCode::arbitrage: return "arbitrage";
        case ErrorCode::numerical: return "numerical";
        case ErrorCode::not_converged: return "not_converged";
        case ErrorCode::schema: return "schema";
        case ErrorCode::unsupported: return "unsupported";
    }
    return "unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace futsmile

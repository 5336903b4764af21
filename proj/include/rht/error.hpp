#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rht {

enum class ErrorCode {
    horizon_too_small,
    invalid_context,
    invalid_item,
    duplicate_item,
    empty_region,
    no_items,
    invalid_reward,
    protocol_error,
    invalid_config,
    dimension_mismatch,
    malformed_input,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::horizon_too_small: return "horizon-too-small";
    case ErrorCode::invalid_context: return "invalid-context";
    case ErrorCode::invalid_item: return "invalid-item";
    case ErrorCode::duplicate_item: return "duplicate-item";
    case ErrorCode::empty_region: return "empty-region";
    case ErrorCode::no_items: return "no-items";
    case ErrorCode::invalid_reward: return "invalid-reward";
    case ErrorCode::protocol_error: return "protocol-error";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::malformed_input: return "malformed-input";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code's name so CLI diagnostics stay greppable.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace rht

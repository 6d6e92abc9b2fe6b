#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace noiselens {

/// Error raised by every module. Carries the offending record index when the
/// failure can be pinned to one input row.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message,
                   std::optional<std::size_t> record = std::nullopt)
        : std::runtime_error(format(message, record)), message_(message), record_(record) {}

    const std::string& message() const noexcept { return message_; }
    std::optional<std::size_t> record() const noexcept { return record_; }

private:
    static std::string format(const std::string& message, std::optional<std::size_t> record) {
        if (!record) return message;
        return message + " (record " + std::to_string(*record) + ")";
    }

    std::string message_;
    std::optional<std::size_t> record_;
};

}  // namespace noiselens

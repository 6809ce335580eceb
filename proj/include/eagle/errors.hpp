#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eagle {

/// Malformed or truncated file contents. byte_offset is the position the
/// reader had reached when the problem was detected (-1 if not applicable).
struct format_error : std::runtime_error {
    int64_t byte_offset;
    explicit format_error(const std::string& msg, int64_t offset = -1)
        : std::runtime_error(offset >= 0 ? msg + " (at byte offset " + std::to_string(offset) + ")"
                                         : msg),
          byte_offset(offset) {}
};

struct unsupported_input_error : std::runtime_error {
    explicit unsupported_input_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace eagle

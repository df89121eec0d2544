#include "ole/errors.hpp"

namespace ole {

namespace {

std::string decorate(const std::string& message, std::optional<std::uint64_t> offset,
                     std::optional<std::uint64_t> row) {
    std::string out = message;
    if (offset) out += " (byte offset " + std::to_string(*offset) + ")";
    if (row) out += " (row " + std::to_string(*row) + ")";
    return out;
}

}  // namespace

FormatError::FormatError(Kind kind, std::string message, std::optional<std::uint64_t> offset,
                         std::optional<std::uint64_t> row)
    : ValidationError(decorate(message, offset, row)), kind_(kind), offset_(offset), row_(row) {}

}  // namespace ole

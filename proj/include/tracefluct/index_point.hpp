#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "tracefluct/error.hpp"

namespace tracefluct {

/// A matrix-entry coordinate (row, col), both 1-based. Ordered lexicographically.
class IndexPoint {
public:
    constexpr IndexPoint() = default;
    constexpr IndexPoint(std::int32_t row, std::int32_t col) : row_(row), col_(col) {
        if (row < 1 || col < 1) {
            throw UsageError("IndexPoint coordinates must be >= 1, got (" + std::to_string(row) +
                             "," + std::to_string(col) + ")");
        }
    }

    constexpr std::int32_t row() const noexcept { return row_; }
    constexpr std::int32_t col() const noexcept { return col_; }

    constexpr auto operator<=>(const IndexPoint&) const = default;

private:
    std::int32_t row_ = 1;
    std::int32_t col_ = 1;
};

using PointTuple = std::vector<IndexPoint>;

inline std::ostream& operator<<(std::ostream& os, const IndexPoint& p) {
    return os << '(' << p.row() << ',' << p.col() << ')';
}

}  // namespace tracefluct

template <>
struct std::hash<tracefluct::IndexPoint> {
    std::size_t operator()(const tracefluct::IndexPoint& p) const noexcept {
        auto packed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.row())) << 32) |
                      static_cast<std::uint32_t>(p.col());
        return std::hash<std::uint64_t>{}(packed);
    }
};

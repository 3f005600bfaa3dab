#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>

namespace ncsim {

/// Dense integer identifier, distinct per tag so node and flow ids do not mix.
template <class Tag>
struct Id {
    std::uint32_t value = std::numeric_limits<std::uint32_t>::max();

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t v) : value(v) {}
    constexpr explicit Id(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
    constexpr explicit Id(int v) : value(static_cast<std::uint32_t>(v)) {}

    [[nodiscard]] constexpr std::size_t index() const { return value; }
    [[nodiscard]] constexpr bool valid() const
    {
        return value != std::numeric_limits<std::uint32_t>::max();
    }

    friend constexpr auto operator<=>(Id, Id) = default;
    friend std::ostream& operator<<(std::ostream& os, Id id) { return os << id.value; }
};

using NodeId = Id<struct NodeTag>;
using FlowId = Id<struct FlowTag>;
using LinkId = Id<struct LinkTag>;
using HyperarcId = Id<struct HyperarcTag>;
using CodeId = Id<struct CodeTag>;

} // namespace ncsim

template <class Tag>
struct std::hash<ncsim::Id<Tag>> {
    std::size_t operator()(ncsim::Id<Tag> id) const noexcept
    {
        return std::hash<std::uint32_t>{}(id.value);
    }
};

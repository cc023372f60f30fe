#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace decaug {

/// Strongly typed integer identifier. Tags keep image, instance, category and
/// interaction ids from being mixed up.
template <typename Tag>
struct Id {
    std::int64_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::int64_t v) : value(v) {}

    friend constexpr auto operator<=>(const Id&, const Id&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Id& id) { return os << id.value; }
};

using ImageId = Id<struct ImageTag>;
using InstanceId = Id<struct InstanceTag>;
using CategoryId = Id<struct CategoryTag>;
using InteractionId = Id<struct InteractionTag>;

}  // namespace decaug

template <typename Tag>
struct std::hash<decaug::Id<Tag>> {
    std::size_t operator()(const decaug::Id<Tag>& id) const noexcept {
        return std::hash<std::int64_t>{}(id.value);
    }
};

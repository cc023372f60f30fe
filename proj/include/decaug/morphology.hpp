#pragma once

#include <utility>
#include <vector>

#include "decaug/bitmask.hpp"

namespace decaug::morph {

/// Offsets of a Euclidean disc: every (dx, dy) with dx² + dy² <= r².
inline std::vector<std::pair<int, int>> disc_offsets(int r) {
    std::vector<std::pair<int, int>> out;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r * r) out.emplace_back(dx, dy);
    return out;
}

/// Dilation by a disc of radius r, clipped to the frame.
inline BitMask dilate(const BitMask& mask, int r) {
    BitMask out(mask.width(), mask.height());
    auto box = mask.bounds();
    if (!box) return out;
    if (r <= 0) return mask;
    const auto disc = disc_offsets(r);
    for (int y = box->y; y < box->bottom(); ++y)
        for (int x = box->x; x < box->right(); ++x) {
            if (!mask.get(x, y)) continue;
            // Interior pixels stamp nothing new.
            if (mask.at(x - 1, y) && mask.at(x + 1, y) && mask.at(x, y - 1) && mask.at(x, y + 1)) {
                out.set(x, y);
                continue;
            }
            for (auto [dx, dy] : disc) {
                int nx = x + dx, ny = y + dy;
                if (nx >= 0 && ny >= 0 && nx < mask.width() && ny < mask.height()) out.set(nx, ny);
            }
        }
    return out;
}

/// Erosion by a disc of radius r. Pixels outside the frame count as background,
/// so a full-frame mask loses its border.
inline BitMask erode(const BitMask& mask, int r) {
    if (r <= 0) return mask;
    BitMask out(mask.width(), mask.height());
    auto box = mask.bounds();
    if (!box) return out;
    const auto disc = disc_offsets(r);
    for (int y = box->y; y < box->bottom(); ++y)
        for (int x = box->x; x < box->right(); ++x) {
            if (!mask.get(x, y)) continue;
            bool keep = true;
            for (auto [dx, dy] : disc)
                if (!mask.at(x + dx, y + dy)) {
                    keep = false;
                    break;
                }
            if (keep) out.set(x, y);
        }
    return out;
}

/// a \ b
inline BitMask subtract(const BitMask& a, const BitMask& b) {
    BitMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out.bits()[i] = (a.bits()[i] && !b.bits()[i]) ? 1 : 0;
    return out;
}

inline BitMask unite(const BitMask& a, const BitMask& b) {
    BitMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out.bits()[i] = (a.bits()[i] || b.bits()[i]) ? 1 : 0;
    return out;
}

}  // namespace decaug::morph

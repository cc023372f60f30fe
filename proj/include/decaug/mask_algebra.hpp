#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <vector>

#include "decaug/annotations.hpp"
#include "decaug/bitmask.hpp"
#include "decaug/errors.hpp"
#include "decaug/morphology.hpp"

namespace decaug {

inline constexpr int kDefaultContourWidth = 3;
inline constexpr double kDefaultInterlockThreshold = 0.1;

/// Outline band of an instance mask.
struct Contour {
    InstanceId mask_id;
    BitMask band;
};

/// dilation(mask, w) \ erosion(mask, w) with a Euclidean disc of radius w. The band
/// straddles the mask edge.
inline BitMask contour_band(const BitMask& mask, int w) {
    if (mask.empty()) throw EmptyMask("contour of an empty mask");
    if (w < 1) throw std::invalid_argument("contour width must be >= 1");
    return morph::subtract(morph::dilate(mask, w), morph::erode(mask, w));
}

inline Contour contour(const Instance& inst, int w) { return {inst.id, contour_band(inst.mask, w)}; }

/// Pixel counts behind the interlocking ratio: u = |Ma ∩ Cb| + |Ca ∩ Mb|, v = |Ca ∪ Cb|.
struct InterlockCounts {
    std::size_t u = 0;
    std::size_t v = 0;

    double ratio() const { return v == 0 ? 0.0 : static_cast<double>(u) / static_cast<double>(v); }
    /// The ratio is documented as lying in [0, 1]; band geometry can still produce u > v
    /// (e.g. masks hugging the frame border). Callers report it rather than clamp.
    bool exceeds_unit() const { return u > v; }
};

inline InterlockCounts interlock_counts(const BitMask& mask_a, const BitMask& band_a, const BitMask& mask_b,
                                        const BitMask& band_b) {
    InterlockCounts c;
    auto ba = band_a.bounds();
    auto bb = band_b.bounds();
    if (!ba && !bb) return c;
    Box roi = ba && bb ? Box{std::min(ba->x, bb->x), std::min(ba->y, bb->y), 0, 0} : (ba ? *ba : *bb);
    if (ba && bb) {
        roi.w = std::max(ba->right(), bb->right()) - roi.x;
        roi.h = std::max(ba->bottom(), bb->bottom()) - roi.y;
    }
    for (int y = roi.y; y < roi.bottom(); ++y)
        for (int x = roi.x; x < roi.right(); ++x) {
            const bool ca = band_a.get(x, y), cb = band_b.get(x, y);
            c.u += (mask_a.get(x, y) && cb) ? 1 : 0;
            c.u += (ca && mask_b.get(x, y)) ? 1 : 0;
            c.v += (ca || cb) ? 1 : 0;
        }
    return c;
}

inline InterlockCounts interlock_counts(const Instance& a, const Instance& b, int w) {
    return interlock_counts(a.mask, contour_band(a.mask, w), b.mask, contour_band(b.mask, w));
}

/// r = U / V; 0 when V = 0.
inline double interlocking_ratio(const Instance& a, const Instance& b, int w) {
    return interlock_counts(a, b, w).ratio();
}

/// Pairwise ratios for every instance pair of one image, bands computed once.
/// Pairs whose dilated boxes do not touch share no band pixel with the other mask,
/// so U = 0 there and the ratio is 0 without counting.
class InterlockTable {
public:
    InterlockTable(std::span<const Instance> instances, int w) : n_(instances.size()), counts_(n_ * n_) {
        std::vector<BitMask> bands;
        std::vector<Box> reach;
        bands.reserve(n_);
        for (const auto& inst : instances) {
            bands.push_back(contour_band(inst.mask, w));
            reach.push_back(inst.bbox.expanded(w, inst.mask.width(), inst.mask.height()));
        }
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                InterlockCounts c;
                if (!reach[i].intersect(reach[j]).empty()) {
                    c = interlock_counts(instances[i].mask, bands[i], instances[j].mask, bands[j]);
                } else {
                    c.v = bands[i].area() + bands[j].area();
                }
                counts_[i * n_ + j] = c;
                counts_[j * n_ + i] = c;
            }
    }

    std::size_t size() const { return n_; }
    const InterlockCounts& at(std::size_t i, std::size_t j) const { return counts_[i * n_ + j]; }
    double ratio(std::size_t i, std::size_t j) const { return at(i, j).ratio(); }

private:
    std::size_t n_;
    std::vector<InterlockCounts> counts_;
};

/// Non-human instances whose ratio with every other instance of the image (humans
/// included) is strictly below t. Sorted by id.
inline std::vector<InstanceId> replaceable_set(const InterlockTable& table, std::span<const Instance> instances,
                                               double t) {
    std::vector<InstanceId> out;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i].is_human) continue;
        bool free = true;
        for (std::size_t j = 0; j < instances.size() && free; ++j)
            if (j != i && !(table.ratio(i, j) < t)) free = false;
        // With no neighbours the condition is vacuous, except t = 0 admits nothing.
        if (free && t > 0.0) out.push_back(instances[i].id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<InstanceId> replaceable_set(std::span<const Instance> instances, double t, int w) {
    return replaceable_set(InterlockTable(instances, w), instances, t);
}

// ---------------------------------------------------------------------------------
// Object state

/// W x H grid over {-1, 0, +1}, row-major. +1 own mask, -1 another instance's mask, 0 background.
struct ObjectStateMatrix {
    int width = 0;
    int height = 0;
    std::vector<std::int8_t> cells;

    std::int8_t at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const ObjectStateMatrix&, const ObjectStateMatrix&) = default;
};

/// Classify each pixel of the target's bbox. The target's own mask takes precedence
/// over overlapping neighbours.
inline ObjectStateMatrix state_matrix(const Instance& target, std::span<const Instance> neighbors) {
    const Box& b = target.bbox;
    ObjectStateMatrix e{b.w, b.h, std::vector<std::int8_t>(static_cast<std::size_t>(b.w) * b.h, 0)};
    for (const auto& n : neighbors) {
        if (n.id == target.id) continue;
        Box overlap = n.bbox.intersect(b);
        for (int y = overlap.y; y < overlap.bottom(); ++y)
            for (int x = overlap.x; x < overlap.right(); ++x)
                if (n.mask.get(x, y)) e.cells[static_cast<std::size_t>(y - b.y) * b.w + (x - b.x)] = -1;
    }
    for (int y = b.y; y < b.bottom(); ++y)
        for (int x = b.x; x < b.right(); ++x)
            if (target.mask.get(x, y)) e.cells[static_cast<std::size_t>(y - b.y) * b.w + (x - b.x)] = 1;
    return e;
}

/// Nearest-neighbour source index along one axis, sampling at destination pixel centres.
inline int nearest_source(int dst, int dst_len, int src_len) {
    long long s = (2LL * dst + 1) * src_len / (2LL * dst_len);
    return static_cast<int>(std::min<long long>(s, src_len - 1));
}

/// Mean absolute cell difference after resizing `ej` to `ei`'s size (nearest neighbour).
/// Range [0, 2]. Not symmetric when the sizes differ.
inline double state_distance(const ObjectStateMatrix& ei, const ObjectStateMatrix& ej) {
    if (ei.cells.empty() || ej.cells.empty()) throw std::invalid_argument("state_distance of an empty matrix");
    std::vector<int> col(ei.width);
    for (int x = 0; x < ei.width; ++x) col[x] = nearest_source(x, ei.width, ej.width);
    long long sum = 0;
    for (int y = 0; y < ei.height; ++y) {
        const int sy = nearest_source(y, ei.height, ej.height);
        const std::int8_t* src = ej.cells.data() + static_cast<std::size_t>(sy) * ej.width;
        const std::int8_t* dst = ei.cells.data() + static_cast<std::size_t>(y) * ei.width;
        for (int x = 0; x < ei.width; ++x) sum += std::abs(dst[x] - src[col[x]]);
    }
    return static_cast<double>(sum) / (static_cast<double>(ei.width) * static_cast<double>(ei.height));
}

}  // namespace decaug

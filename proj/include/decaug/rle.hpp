#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "decaug/bitmask.hpp"
#include "decaug/errors.hpp"

namespace decaug::rle {

// COCO run-length encoding: alternating runs of 0s and 1s (starting with 0s) over
// the mask read in column-major order.

inline BitMask decode_counts(const std::vector<std::uint64_t>& counts, int width, int height) {
    BitMask mask(width, height);
    const std::uint64_t total = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
    std::uint64_t pos = 0;
    bool value = false;
    for (std::uint64_t run : counts) {
        if (run > total - pos)
            throw DecodeError("RLE runs exceed " + std::to_string(width) + "x" + std::to_string(height));
        if (value)
            for (std::uint64_t i = pos; i < pos + run; ++i)
                mask.set(static_cast<int>(i / static_cast<std::uint64_t>(height)),
                         static_cast<int>(i % static_cast<std::uint64_t>(height)));
        pos += run;
        value = !value;
    }
    return mask;
}

inline std::vector<std::uint64_t> encode_counts(const BitMask& mask) {
    std::vector<std::uint64_t> counts;
    bool value = false;
    std::uint64_t run = 0;
    for (int x = 0; x < mask.width(); ++x)
        for (int y = 0; y < mask.height(); ++y) {
            if (mask.get(x, y) != value) {
                counts.push_back(run);
                run = 0;
                value = !value;
            }
            ++run;
        }
    counts.push_back(run);
    return counts;
}

/// Decode the compact ASCII form produced by the COCO API (`counts` as a string).
inline std::vector<std::uint64_t> counts_from_string(std::string_view s) {
    std::vector<std::int64_t> cnts;
    std::size_t p = 0;
    while (p < s.size()) {
        std::int64_t x = 0;
        int k = 0;
        bool more = true;
        int c = 0;
        while (more) {
            if (p >= s.size()) throw DecodeError("truncated compressed RLE string");
            c = static_cast<unsigned char>(s[p]) - 48;
            if (c < 0 || c > 63) throw DecodeError("invalid character in compressed RLE string");
            if (k >= 12) throw DecodeError("compressed RLE value too long");
            x |= static_cast<std::int64_t>(c & 0x1f) << (5 * k);
            more = (c & 0x20) != 0;
            ++p;
            ++k;
            if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
        }
        if (cnts.size() > 2) x += cnts[cnts.size() - 2];
        if (x < 0) throw DecodeError("negative run in compressed RLE string");
        cnts.push_back(x);
    }
    return {cnts.begin(), cnts.end()};
}

inline std::string counts_to_string(const std::vector<std::uint64_t>& counts) {
    std::string s;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        auto x = static_cast<std::int64_t>(counts[i]);
        if (i > 2) x -= static_cast<std::int64_t>(counts[i - 2]);
        bool more = true;
        while (more) {
            std::int64_t c = x & 0x1f;
            x >>= 5;
            more = (c & 0x10) ? x != -1 : x != 0;
            if (more) c |= 0x20;
            s.push_back(static_cast<char>(c + 48));
        }
    }
    return s;
}

/// Fill polygon rings (flat x0,y0,x1,y1,... lists) into a mask. Within one ring the
/// even-odd rule applies; separate rings are unioned. A pixel is inside when its
/// centre (px + 0.5, py + 0.5) is inside.
inline BitMask fill_polygons(const std::vector<std::vector<double>>& rings, int width, int height) {
    BitMask mask(width, height);
    std::vector<double> xs;
    for (const auto& ring : rings) {
        if (ring.size() % 2 != 0) throw DecodeError("polygon has an odd number of coordinates");
        const std::size_t n = ring.size() / 2;
        if (n < 3) continue;
        for (int py = 0; py < height; ++py) {
            const double yc = py + 0.5;
            xs.clear();
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = (i + 1) % n;
                double x0 = ring[2 * i], y0 = ring[2 * i + 1];
                double x1 = ring[2 * j], y1 = ring[2 * j + 1];
                if ((y0 <= yc && yc < y1) || (y1 <= yc && yc < y0))
                    xs.push_back(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                // Pixel centres xc with xs[k] < xc < xs[k+1].
                int first = static_cast<int>(std::floor(xs[k] - 0.5)) + 1;
                int last = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1;
                first = std::max(first, 0);
                last = std::min(last, width - 1);
                for (int px = first; px <= last; ++px) mask.set(px, py);
            }
        }
    }
    return mask;
}

}  // namespace decaug::rle

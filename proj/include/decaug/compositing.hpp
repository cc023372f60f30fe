#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <tuple>
#include <vector>

#include "decaug/bitmask.hpp"
#include "decaug/errors.hpp"
#include "decaug/image.hpp"

namespace decaug {

inline constexpr int kDefaultFeather = 2;
inline constexpr int kDefaultInpaintRadius = 3;

/// Cropped instance with straight (non-premultiplied) alpha.
struct RgbaPatch {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // interleaved, row-major
    std::vector<float> alpha;       // in [0, 1], row-major

    float alpha_at(int x, int y) const { return alpha[static_cast<std::size_t>(y) * width + x]; }
    const std::uint8_t* rgb_at(int x, int y) const { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
};

namespace detail {

/// Disc offsets of radius r sorted by distance (ties by dy, dx).
inline std::vector<std::tuple<int, int, int>> offsets_by_distance(int r) {
    std::vector<std::tuple<int, int, int>> out;  // (d², dy, dx)
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r * r && (dx || dy)) out.emplace_back(dx * dx + dy * dy, dy, dx);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Feathered alpha of one in-mask pixel: 1 when every pixel within `feather` of it is
/// in the mask, otherwise (d - 0.5) / feather with d the centre distance to the
/// nearest background pixel (frame exterior counts as background).
inline float feather_alpha(const BitMask& mask, int x, int y, int feather,
                           const std::vector<std::tuple<int, int, int>>& offsets) {
    if (!mask.get(x, y)) return 0.0f;
    if (feather <= 0) return 1.0f;
    for (const auto& [d2, dy, dx] : offsets)
        if (!mask.at(x + dx, y + dy)) {
            const double a = (std::sqrt(static_cast<double>(d2)) - 0.5) / feather;
            return static_cast<float>(std::clamp(a, 0.0, 1.0));
        }
    return 1.0f;
}

/// Crop the mask's tight bounds out of `image` with a feathered alpha channel.
inline RgbaPatch extract_instance(const RgbImage& image, const BitMask& mask, int feather = kDefaultFeather) {
    if (mask.width() != image.width || mask.height() != image.height)
        throw std::invalid_argument("extract_instance: mask and image sizes differ");
    auto box = mask.bounds();
    if (!box) throw EmptyMask("extract_instance of an empty mask");
    const auto offsets = detail::offsets_by_distance(std::max(feather, 0));
    RgbaPatch p;
    p.width = box->w;
    p.height = box->h;
    p.rgb.resize(static_cast<std::size_t>(p.width) * p.height * 3);
    p.alpha.resize(static_cast<std::size_t>(p.width) * p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            const std::uint8_t* src = image.at(box->x + x, box->y + y);
            std::copy(src, src + 3, p.rgb.begin() + (static_cast<std::ptrdiff_t>(y) * p.width + x) * 3);
            p.alpha[static_cast<std::size_t>(y) * p.width + x] = feather_alpha(mask, box->x + x, box->y + y, feather, offsets);
        }
    return p;
}

/// Bilinear resample of colour and alpha, sampling at pixel centres. Same-size
/// resizes are exact copies.
inline RgbaPatch resize_patch(const RgbaPatch& src, int width, int height) {
    if (width == src.width && height == src.height) return src;
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize_patch: non-positive size");
    RgbaPatch dst;
    dst.width = width;
    dst.height = height;
    dst.rgb.resize(static_cast<std::size_t>(width) * height * 3);
    dst.alpha.resize(static_cast<std::size_t>(width) * height);
    auto axis = [](int d, int dlen, int slen) {
        double s = (d + 0.5) * static_cast<double>(slen) / dlen - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(slen - 1));
        int i0 = static_cast<int>(std::floor(s));
        int i1 = std::min(i0 + 1, slen - 1);
        return std::tuple<int, int, double>(i0, i1, s - i0);
    };
    for (int y = 0; y < height; ++y) {
        auto [y0, y1, fy] = axis(y, height, src.height);
        for (int x = 0; x < width; ++x) {
            auto [x0, x1, fx] = axis(x, width, src.width);
            const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
            for (int c = 0; c < 3; ++c) {
                double v = w00 * src.rgb_at(x0, y0)[c] + w10 * src.rgb_at(x1, y0)[c] + w01 * src.rgb_at(x0, y1)[c] +
                           w11 * src.rgb_at(x1, y1)[c];
                dst.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
            dst.alpha[static_cast<std::size_t>(y) * width + x] =
                static_cast<float>(w00 * src.alpha_at(x0, y0) + w10 * src.alpha_at(x1, y0) + w01 * src.alpha_at(x0, y1) +
                                   w11 * src.alpha_at(x1, y1));
        }
    }
    return dst;
}

/// Alpha-over a same-size patch with its top-left corner at (x, y). Pixels with
/// alpha 0 are left untouched.
inline void composite_into(RgbImage& base, const RgbaPatch& patch, int x, int y) {
    if (!Box{x, y, patch.width, patch.height}.inside(base.width, base.height))
        throw OutOfBounds("paste target lies outside the image");
    for (int py = 0; py < patch.height; ++py)
        for (int px = 0; px < patch.width; ++px) {
            const double a = patch.alpha_at(px, py);
            if (a <= 0.0) continue;
            std::uint8_t* dst = base.at(x + px, y + py);
            const std::uint8_t* src = patch.rgb_at(px, py);
            if (a >= 1.0) {
                std::copy(src, src + 3, dst);
                continue;
            }
            for (int c = 0; c < 3; ++c)
                dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(a * src[c] + (1.0 - a) * dst[c]), 0L, 255L));
        }
}

/// Resize `patch` to the target box and composite it on top of `base`.
inline RgbImage paste(const RgbImage& base, const RgbaPatch& patch, const Box& target) {
    if (target.empty() || !target.inside(base.width, base.height))
        throw OutOfBounds("paste target lies outside the image");
    RgbImage out = base;
    composite_into(out, resize_patch(patch, target.w, target.h), target.x, target.y);
    return out;
}

// ---------------------------------------------------------------------------------
// Telea fast-marching inpainting

namespace detail {

enum class FmmState : std::uint8_t { Known, Band, Inside };

inline constexpr double kFar = 1.0e6;

}  // namespace detail

/// Fill `hole` by fast marching from its boundary inward (Telea). Each pixel, once
/// reached, becomes the normalised weighted average of first-order estimates from the
/// non-hole and already-filled pixels within `radius`, weighted by direction
/// (alignment with the arrival-time gradient), inverse squared distance, and
/// level-set proximity.
inline RgbImage inpaint_hole(const RgbImage& image, const BitMask& hole, int radius = kDefaultInpaintRadius) {
    using detail::FmmState;
    if (hole.width() != image.width || hole.height() != image.height)
        throw std::invalid_argument("inpaint_hole: hole and image sizes differ");
    const std::size_t holes = hole.area();
    if (holes == 0) return image;
    if (holes == hole.size()) throw HoleCoversImage("hole covers the whole image; nothing to propagate from");
    radius = std::max(radius, 1);

    const int W = image.width, H = image.height;
    auto idx = [W](int x, int y) { return static_cast<std::size_t>(y) * W + x; };
    std::vector<FmmState> state(hole.size(), FmmState::Known);
    std::vector<double> T(hole.size(), 0.0);
    for (std::size_t i = 0; i < hole.size(); ++i)
        if (hole.bits()[i]) {
            state[i] = FmmState::Inside;
            T[i] = detail::kFar;
        }

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    const int nx4[4] = {1, -1, 0, 0}, ny4[4] = {0, 0, 1, -1};
    auto in_frame = [W, H](int x, int y) { return x >= 0 && y >= 0 && x < W && y < H; };

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (state[idx(x, y)] != FmmState::Known) continue;
            for (int k = 0; k < 4; ++k) {
                int ax = x + nx4[k], ay = y + ny4[k];
                if (in_frame(ax, ay) && state[idx(ax, ay)] == FmmState::Inside) {
                    state[idx(x, y)] = FmmState::Band;
                    heap.emplace(0.0, idx(x, y));
                    break;
                }
            }
        }

    auto available = [&](int x, int y) { return in_frame(x, y) && state[idx(x, y)] != FmmState::Inside; };
    auto solve = [&](int x1, int y1, int x2, int y2) {
        const bool k1 = in_frame(x1, y1) && state[idx(x1, y1)] == FmmState::Known;
        const bool k2 = in_frame(x2, y2) && state[idx(x2, y2)] == FmmState::Known;
        if (k1 && k2) {
            const double a = T[idx(x1, y1)], b = T[idx(x2, y2)];
            if (std::abs(a - b) >= 1.0) return 1.0 + std::min(a, b);
            return 0.5 * (a + b + std::sqrt(2.0 - (a - b) * (a - b)));
        }
        if (k1) return 1.0 + T[idx(x1, y1)];
        if (k2) return 1.0 + T[idx(x2, y2)];
        return detail::kFar;
    };
    auto gradient = [&](int x, int y) {
        const double t = T[idx(x, y)];
        double gx = 0.0, gy = 0.0;
        const bool r = available(x + 1, y), l = available(x - 1, y);
        if (r && l) gx = 0.5 * (T[idx(x + 1, y)] - T[idx(x - 1, y)]);
        else if (r) gx = T[idx(x + 1, y)] - t;
        else if (l) gx = t - T[idx(x - 1, y)];
        const bool d = available(x, y + 1), u = available(x, y - 1);
        if (d && u) gy = 0.5 * (T[idx(x, y + 1)] - T[idx(x, y - 1)]);
        else if (d) gy = T[idx(x, y + 1)] - t;
        else if (u) gy = t - T[idx(x, y - 1)];
        return std::pair<double, double>(gx, gy);
    };

    RgbImage out = image;
    const int r2 = radius * radius;
    auto image_gradient = [&](int x, int y, int k) {
        auto at = [&](int u, int v) { return static_cast<double>(out.at(u, v)[k]); };
        double ix = 0.0, iy = 0.0;
        const bool r = available(x + 1, y), l = available(x - 1, y);
        if (r && l) ix = 0.5 * (at(x + 1, y) - at(x - 1, y));
        else if (r) ix = at(x + 1, y) - at(x, y);
        else if (l) ix = at(x, y) - at(x - 1, y);
        const bool d = available(x, y + 1), u = available(x, y - 1);
        if (d && u) iy = 0.5 * (at(x, y + 1) - at(x, y - 1));
        else if (d) iy = at(x, y + 1) - at(x, y);
        else if (u) iy = at(x, y) - at(x, y - 1);
        return std::pair<double, double>(ix, iy);
    };
    auto fill = [&](int x, int y) {
        auto [gx, gy] = gradient(x, y);
        const double gn = std::hypot(gx, gy);
        const double tp = T[idx(x, y)];
        double acc[3] = {0, 0, 0}, wsum = 0;
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
                const int d2 = dx * dx + dy * dy;
                if (d2 == 0 || d2 > r2) continue;
                const int qx = x + dx, qy = y + dy;
                if (!available(qx, qy)) continue;
                const double len = std::sqrt(static_cast<double>(d2));
                // r points from q towards p.
                double dir = gn > 0 ? std::abs((-dx) * gx + (-dy) * gy) / (len * gn) : 1.0;
                if (dir <= 0.01) dir = 1e-6;
                const double dst = 1.0 / d2;
                const double lev = 1.0 / (1.0 + std::abs(T[idx(qx, qy)] - tp));
                const double w = dir * dst * lev;
                const std::uint8_t* c = out.at(qx, qy);
                // First-order estimate I(q) + grad I(q) . (p - q).
                for (int k = 0; k < 3; ++k) {
                    auto [ix, iy] = image_gradient(qx, qy, k);
                    acc[k] += w * (c[k] + ix * (-dx) + iy * (-dy));
                }
                wsum += w;
            }
        std::uint8_t* dst = out.at(x, y);
        for (int k = 0; k < 3; ++k)
            dst[k] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[k] / wsum), 0L, 255L));
    };

    while (!heap.empty()) {
        auto [t, i] = heap.top();
        heap.pop();
        if (state[i] == FmmState::Known || t != T[i]) continue;
        state[i] = FmmState::Known;
        const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
        for (int k = 0; k < 4; ++k) {
            const int ax = x + nx4[k], ay = y + ny4[k];
            if (!in_frame(ax, ay) || !hole.get(ax, ay) || state[idx(ax, ay)] == FmmState::Known) continue;
            const double tn = std::min({solve(ax - 1, ay, ax, ay - 1), solve(ax + 1, ay, ax, ay - 1),
                                        solve(ax - 1, ay, ax, ay + 1), solve(ax + 1, ay, ax, ay + 1)});
            // Band pixels are refined when a shorter arrival time appears.
            if (state[idx(ax, ay)] == FmmState::Band && tn >= T[idx(ax, ay)]) continue;
            T[idx(ax, ay)] = tn;
            state[idx(ax, ay)] = FmmState::Band;
            fill(ax, ay);
            heap.emplace(T[idx(ax, ay)], idx(ax, ay));
        }
    }
    return out;
}

}  // namespace decaug

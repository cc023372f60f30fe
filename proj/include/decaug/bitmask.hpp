#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace decaug {

/// Integer pixel box: columns [x, x + w), rows [y, y + h).
struct Box {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }
    int bottom() const { return y + h; }
    bool empty() const { return w <= 0 || h <= 0; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }

    bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }
    bool inside(int width, int height) const {
        return x >= 0 && y >= 0 && right() <= width && bottom() <= height;
    }

    /// Grow by `r` on every side, then clip to [0, width) x [0, height).
    Box expanded(int r, int width, int height) const {
        int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
        int x1 = std::min(width, right() + r), y1 = std::min(height, bottom() + r);
        return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
    }

    Box intersect(const Box& o) const {
        int x0 = std::max(x, o.x), y0 = std::max(y, o.y);
        int x1 = std::min(right(), o.right()), y1 = std::min(bottom(), o.bottom());
        return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Dense binary raster, row-major, one byte per pixel holding 0 or 1.
class BitMask {
public:
    BitMask() = default;
    BitMask(int width, int height) : width_(width), height_(height) {
        if (width < 0 || height < 0) throw std::invalid_argument("BitMask: negative dimensions");
        bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return bits_.size(); }

    bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
    /// Out-of-range reads return false.
    bool at(int x, int y) const {
        return x >= 0 && y >= 0 && x < width_ && y < height_ && get(x, y);
    }

    const std::vector<std::uint8_t>& bits() const { return bits_; }
    std::vector<std::uint8_t>& bits() { return bits_; }

    std::size_t area() const {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool empty() const { return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end(); }

    /// Tight axis-aligned bounds of the set pixels; nullopt when the mask is empty.
    std::optional<Box> bounds() const {
        int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
        for (int y = 0; y < height_; ++y) {
            const std::uint8_t* row = bits_.data() + static_cast<std::size_t>(y) * width_;
            for (int x = 0; x < width_; ++x) {
                if (row[x]) {
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                }
            }
        }
        if (x1 < 0) return std::nullopt;
        return Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    }

    /// Shift by (dx, dy); pixels leaving the frame are dropped.
    BitMask translated(int dx, int dy) const {
        BitMask out(width_, height_);
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                if (get(x, y)) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < width_ && ny < height_) out.set(nx, ny);
                }
        return out;
    }

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// |a ∩ b| restricted to `roi`. Masks must share dimensions.
inline std::size_t intersection_area(const BitMask& a, const BitMask& b, const Box& roi) {
    std::size_t n = 0;
    for (int y = roi.y; y < roi.bottom(); ++y)
        for (int x = roi.x; x < roi.right(); ++x) n += (a.get(x, y) && b.get(x, y)) ? 1 : 0;
    return n;
}

inline std::size_t union_area(const BitMask& a, const BitMask& b, const Box& roi) {
    std::size_t n = 0;
    for (int y = roi.y; y < roi.bottom(); ++y)
        for (int x = roi.x; x < roi.right(); ++x) n += (a.get(x, y) || b.get(x, y)) ? 1 : 0;
    return n;
}

inline Box full_frame(const BitMask& m) { return {0, 0, m.width(), m.height()}; }

}  // namespace decaug

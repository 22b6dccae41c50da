#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"

namespace cadenza::image {

struct Color {
    std::uint8_t r = 0, g = 0, b = 0, a = 255;

    bool operator==(const Color&) const = default;
};

inline constexpr Color kBlack{0, 0, 0, 255};
inline constexpr Color kWhite{255, 255, 255, 255};

/// Named colors for the score scripting surface.
inline Color color_from_name(const std::string& name) {
    if (name == "black") return {0, 0, 0, 255};
    if (name == "white") return {255, 255, 255, 255};
    if (name == "red") return {200, 30, 30, 255};
    if (name == "green") return {30, 160, 60, 255};
    if (name == "blue") return {40, 70, 200, 255};
    if (name == "gray" || name == "grey") return {128, 128, 128, 255};
    throw ConfigError("unknown color name '" + name + "'");
}

/// 8-bit RGBA raster with top-left origin.
struct Raster {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> rgba;

    Raster() = default;
    Raster(std::size_t w, std::size_t h, Color fill = kWhite) : width(w), height(h) {
        rgba.assign(w * h * 4, 0);
        for (std::size_t i = 0; i < w * h; ++i) {
            rgba[i * 4 + 0] = fill.r;
            rgba[i * 4 + 1] = fill.g;
            rgba[i * 4 + 2] = fill.b;
            rgba[i * 4 + 3] = fill.a;
        }
    }

    bool in_bounds(long x, long y) const {
        return x >= 0 && y >= 0 && std::size_t(x) < width && std::size_t(y) < height;
    }

    void set(long x, long y, Color c) {
        if (!in_bounds(x, y)) return;
        const std::size_t i = (std::size_t(y) * width + std::size_t(x)) * 4;
        rgba[i] = c.r;
        rgba[i + 1] = c.g;
        rgba[i + 2] = c.b;
        rgba[i + 3] = c.a;
    }

    Color get(long x, long y) const {
        const std::size_t i = (std::size_t(y) * width + std::size_t(x)) * 4;
        return {rgba[i], rgba[i + 1], rgba[i + 2], rgba[i + 3]};
    }

    void fill_rect(long x0, long y0, long w, long h, Color c) {
        for (long y = y0; y < y0 + h; ++y)
            for (long x = x0; x < x0 + w; ++x) set(x, y, c);
    }

    void hline(long x0, long x1, long y, long thickness, Color c) {
        if (x1 < x0) std::swap(x0, x1);
        fill_rect(x0, y, x1 - x0 + 1, thickness, c);
    }

    void vline(long x, long y0, long y1, long thickness, Color c) {
        if (y1 < y0) std::swap(y0, y1);
        fill_rect(x, y0, thickness, y1 - y0 + 1, c);
    }

    /// Bresenham segment with square pen of the given width.
    void line(long x0, long y0, long x1, long y1, Color c, long width_px = 1) {
        const long dx = std::labs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        const long dy = -std::labs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        long err = dx + dy;
        const long half = width_px / 2;
        while (true) {
            fill_rect(x0 - half, y0 - half, width_px, width_px, c);
            if (x0 == x1 && y0 == y1) break;
            const long e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void fill_ellipse(long cx, long cy, long rx, long ry, Color c) {
        if (rx < 1) rx = 1;
        if (ry < 1) ry = 1;
        for (long y = -ry; y <= ry; ++y)
            for (long x = -rx; x <= rx; ++x) {
                const double nx = double(x) / double(rx), ny = double(y) / double(ry);
                if (nx * nx + ny * ny <= 1.0) set(cx + x, cy + y, c);
            }
    }

    void ellipse_outline(long cx, long cy, long rx, long ry, Color c, long thickness = 1) {
        if (rx < 1) rx = 1;
        if (ry < 1) ry = 1;
        const double t = double(thickness);
        for (long y = -ry; y <= ry; ++y)
            for (long x = -rx; x <= rx; ++x) {
                const double nx = double(x) / double(rx), ny = double(y) / double(ry);
                const double d = nx * nx + ny * ny;
                const double inner_rx = std::max(1.0, double(rx) - t);
                const double inner_ry = std::max(1.0, double(ry) - t);
                const double ix = double(x) / inner_rx, iy = double(y) / inner_ry;
                if (d <= 1.0 && ix * ix + iy * iy >= 1.0) set(cx + x, cy + y, c);
            }
    }
};

} // namespace cadenza::image

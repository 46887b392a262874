#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace vrd {

// Axis-aligned box in pixel coordinates, origin top-left.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    bool operator==(const Box&) const = default;
};

// Center/size parameterization used by box deltas.
struct CenterBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct ImageSize {
    double w = 0.0;
    double h = 0.0;
};

struct Detection {
    std::string image_id;
    int label = 0;
    double score = 0.0;
    Box box;
    std::optional<std::uint32_t> feature_ref;
};

inline bool box_valid(const Box& b) {
    return std::isfinite(b.x_min) && std::isfinite(b.y_min) && std::isfinite(b.x_max) &&
           std::isfinite(b.y_max) && b.x_min < b.x_max && b.y_min < b.y_max;
}

inline void check_box(const Box& b) {
    if (!box_valid(b)) {
        throw std::invalid_argument("degenerate or non-finite box [" + std::to_string(b.x_min) +
                                    "," + std::to_string(b.y_min) + "," + std::to_string(b.x_max) +
                                    "," + std::to_string(b.y_max) + "]");
    }
}

inline CenterBox to_center(const Box& b) {
    return CenterBox{(b.x_min + b.x_max) * 0.5, (b.y_min + b.y_max) * 0.5, b.x_max - b.x_min,
                     b.y_max - b.y_min};
}

inline Box from_center(const CenterBox& c) {
    return Box{c.x - c.w * 0.5, c.y - c.h * 0.5, c.x + c.w * 0.5, c.y + c.h * 0.5};
}

inline double iou(const Box& a, const Box& b) {
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

inline Box union_box(const Box& a, const Box& b) {
    return Box{std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
               std::max(a.y_max, b.y_max)};
}

}  // namespace vrd

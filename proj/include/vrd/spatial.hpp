#pragma once

#include <array>
#include <cmath>

#include "vrd/geometry.hpp"

namespace vrd {

inline constexpr std::size_t kSpatialDim = 22;

using SpatialFeature = std::array<double, kSpatialDim>;

// <(x1-x2)/w2, (y1-y2)/h2, log(w1/w2), log(h1/h2)>
inline std::array<double, 4> box_delta(const CenterBox& b1, const CenterBox& b2) {
    return {(b1.x - b2.x) / b2.w, (b1.y - b2.y) / b2.h, std::log(b1.w / b2.w),
            std::log(b1.h / b2.h)};
}

// <x_min/w, y_min/h, x_max/w, y_max/h, a_box/a_img>
inline std::array<double, 5> normalized_coords(const Box& b, const ImageSize& img) {
    return {b.x_min / img.w, b.y_min / img.h, b.x_max / img.w, b.y_max / img.h,
            b.area() / (img.w * img.h)};
}

// 22-dim concatenation <delta(S,O), delta(S,P), delta(P,O), c(S), c(O)>
// with the predicate box P taken as the tight union of S and O.
inline SpatialFeature spatial_feature(const Box& subject, const Box& object,
                                      const ImageSize& img) {
    const Box pred = union_box(subject, object);
    const CenterBox cs = to_center(subject);
    const CenterBox co = to_center(object);
    const CenterBox cp = to_center(pred);

    SpatialFeature out{};
    std::size_t k = 0;
    for (double v : box_delta(cs, co)) out[k++] = v;
    for (double v : box_delta(cs, cp)) out[k++] = v;
    for (double v : box_delta(cp, co)) out[k++] = v;
    for (double v : normalized_coords(subject, img)) out[k++] = v;
    for (double v : normalized_coords(object, img)) out[k++] = v;
    return out;
}

}  // namespace vrd

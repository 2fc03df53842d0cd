#include "kernels/scalar_ops.hpp"
#include "slender/simd.hpp"

namespace slender::simd::scalar {

void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out) {
    const double ax1 = a.x, ay1 = a.y, ax2 = a.x2(), ay2 = a.y2(), a_area = a.area();
    for (std::size_t i = begin; i < end; ++i)
        out[i - begin] = detail::iou_corners(ax1, ay1, ax2, ay2, a_area, cols.x1[i], cols.y1[i], cols.x2[i],
                                             cols.y2[i], cols.area[i]);
}

void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask) {
    const double x1 = box.x, y1 = box.y, x2 = box.x2(), y2 = box.y2();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = xs[i], y = ys[i];
        const bool in = inclusive ? (x >= x1 && x <= x2 && y >= y1 && y <= y2)
                                  : (x > x1 && x < x2 && y > y1 && y < y2);
        mask[i] = in ? 1 : 0;
    }
}

}  // namespace slender::simd::scalar

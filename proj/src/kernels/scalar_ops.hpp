#pragma once

// Scalar primitives with the exact select semantics of the x86 packed
// min/max instructions: min(a, b) = a < b ? a : b, max(a, b) = a > b ? a : b.
// std::min/std::max differ on signed zeros, which would break bit equality
// between the scalar and vector kernels.

namespace slender::simd::detail {

inline double vmin(double a, double b) noexcept { return a < b ? a : b; }
inline double vmax(double a, double b) noexcept { return a > b ? a : b; }

/// IoU of box a against box b, both given by corners plus precomputed area.
inline double iou_corners(double ax1, double ay1, double ax2, double ay2, double a_area, double bx1,
                          double by1, double bx2, double by2, double b_area) noexcept {
    const double iw = vmax(vmin(ax2, bx2) - vmax(ax1, bx1), 0.0);
    const double ih = vmax(vmin(ay2, by2) - vmax(ay1, by1), 0.0);
    const double inter = iw * ih;
    const double uni = (a_area + b_area) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace slender::simd::detail

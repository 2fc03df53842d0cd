#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "slender/geometry.hpp"

// Batched box kernels. Each kernel has a scalar reference and, where the
// target supports it, an AVX2 variant chosen at runtime. Every variant
// produces bit-identical output to the scalar reference.

namespace slender::simd {

enum class Level : std::uint8_t { scalar = 0, avx2 = 1 };

std::string_view to_string(Level level) noexcept;

/// Best level this CPU and build support.
Level detected() noexcept;

/// Level the dispatching entry points use. Defaults to detected(), lowered
/// by SLENDER_SIMD=scalar in the environment or by set_active().
Level active() noexcept;

/// Requests a level; clamped to detected(). Returns the level in effect.
Level set_active(Level level) noexcept;

/// Structure-of-arrays box storage (corners plus area).
struct BoxColumns {
    std::vector<double> x1, y1, x2, y2, area;

    BoxColumns() = default;
    explicit BoxColumns(std::span<const AABox> boxes);

    void push_back(const AABox& box);
    std::size_t size() const noexcept { return x1.size(); }
};

/// out[i] = iou(a, cols[begin + i]) for i < end - begin.
void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out);

/// mask[i] = 1 when (xs[i], ys[i]) lies inside `box` (strictly, or with the
/// border counted as inside when `inclusive`), else 0.
void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask);

// Explicit variants, used by the equivalence tests and the dispatcher.
namespace scalar {
void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out);
void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask);
}  // namespace scalar

namespace avx2 {
/// True when this build contains the AVX2 variants.
bool compiled() noexcept;
void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out);
void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask);
}  // namespace avx2

}  // namespace slender::simd

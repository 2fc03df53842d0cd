#include <atomic>
#include <cstdlib>
#include <string_view>

#include "slender/simd.hpp"

namespace slender::simd {
namespace {

Level probe() noexcept {
#if defined(SLENDER_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2")) return Level::avx2;
#endif
    return Level::scalar;
}

Level initial() noexcept {
    const Level best = probe();
    if (const char* env = std::getenv("SLENDER_SIMD"); env && std::string_view(env) == "scalar")
        return Level::scalar;
    return best;
}

std::atomic<Level>& current() noexcept {
    static std::atomic<Level> level{initial()};
    return level;
}

}  // namespace

std::string_view to_string(Level level) noexcept {
    return level == Level::avx2 ? "avx2" : "scalar";
}

Level detected() noexcept {
    static const Level level = probe();
    return level;
}

Level active() noexcept { return current().load(std::memory_order_relaxed); }

Level set_active(Level level) noexcept {
    if (static_cast<int>(level) > static_cast<int>(detected())) level = detected();
    current().store(level, std::memory_order_relaxed);
    return level;
}

BoxColumns::BoxColumns(std::span<const AABox> boxes) {
    x1.reserve(boxes.size());
    y1.reserve(boxes.size());
    x2.reserve(boxes.size());
    y2.reserve(boxes.size());
    area.reserve(boxes.size());
    for (const auto& b : boxes) push_back(b);
}

void BoxColumns::push_back(const AABox& box) {
    x1.push_back(box.x);
    y1.push_back(box.y);
    x2.push_back(box.x2());
    y2.push_back(box.y2());
    area.push_back(box.area());
}

void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out) {
    if (active() == Level::avx2)
        avx2::iou_row(a, cols, begin, end, out);
    else
        scalar::iou_row(a, cols, begin, end, out);
}

void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask) {
    if (active() == Level::avx2)
        avx2::points_inside(box, xs, ys, inclusive, mask);
    else
        scalar::points_inside(box, xs, ys, inclusive, mask);
}

}  // namespace slender::simd

#include "slender/simd.hpp"

#if defined(SLENDER_HAVE_AVX2)

#include <immintrin.h>

#include "kernels/scalar_ops.hpp"

namespace slender::simd::avx2 {

bool compiled() noexcept { return true; }

void iou_row(const AABox& a, const BoxColumns& cols, std::size_t begin, std::size_t end,
             std::span<double> out) {
    const double ax1 = a.x, ay1 = a.y, ax2 = a.x2(), ay2 = a.y2(), a_area = a.area();
    const __m256d vax1 = _mm256_set1_pd(ax1), vay1 = _mm256_set1_pd(ay1);
    const __m256d vax2 = _mm256_set1_pd(ax2), vay2 = _mm256_set1_pd(ay2);
    const __m256d varea = _mm256_set1_pd(a_area);
    const __m256d zero = _mm256_setzero_pd();

    std::size_t i = begin;
    double* dst = out.data();
    for (; i + 4 <= end; i += 4) {
        const __m256d bx1 = _mm256_loadu_pd(&cols.x1[i]);
        const __m256d by1 = _mm256_loadu_pd(&cols.y1[i]);
        const __m256d bx2 = _mm256_loadu_pd(&cols.x2[i]);
        const __m256d by2 = _mm256_loadu_pd(&cols.y2[i]);
        const __m256d barea = _mm256_loadu_pd(&cols.area[i]);

        const __m256d iw = _mm256_max_pd(_mm256_sub_pd(_mm256_min_pd(vax2, bx2), _mm256_max_pd(vax1, bx1)), zero);
        const __m256d ih = _mm256_max_pd(_mm256_sub_pd(_mm256_min_pd(vay2, by2), _mm256_max_pd(vay1, by1)), zero);
        const __m256d inter = _mm256_mul_pd(iw, ih);
        const __m256d uni = _mm256_sub_pd(_mm256_add_pd(varea, barea), inter);
        const __m256d ratio = _mm256_div_pd(inter, uni);
        const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dst + (i - begin), _mm256_and_pd(positive, ratio));
    }
    for (; i < end; ++i)
        dst[i - begin] = detail::iou_corners(ax1, ay1, ax2, ay2, a_area, cols.x1[i], cols.y1[i], cols.x2[i],
                                             cols.y2[i], cols.area[i]);
}

void points_inside(const AABox& box, std::span<const double> xs, std::span<const double> ys,
                   bool inclusive, std::span<std::uint8_t> mask) {
    const __m256d x1 = _mm256_set1_pd(box.x), y1 = _mm256_set1_pd(box.y);
    const __m256d x2 = _mm256_set1_pd(box.x2()), y2 = _mm256_set1_pd(box.y2());
    const std::size_t n = xs.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(&xs[i]);
        const __m256d y = _mm256_loadu_pd(&ys[i]);
        __m256d in;
        if (inclusive) {
            in = _mm256_and_pd(_mm256_and_pd(_mm256_cmp_pd(x, x1, _CMP_GE_OQ), _mm256_cmp_pd(x, x2, _CMP_LE_OQ)),
                               _mm256_and_pd(_mm256_cmp_pd(y, y1, _CMP_GE_OQ), _mm256_cmp_pd(y, y2, _CMP_LE_OQ)));
        } else {
            in = _mm256_and_pd(_mm256_and_pd(_mm256_cmp_pd(x, x1, _CMP_GT_OQ), _mm256_cmp_pd(x, x2, _CMP_LT_OQ)),
                               _mm256_and_pd(_mm256_cmp_pd(y, y1, _CMP_GT_OQ), _mm256_cmp_pd(y, y2, _CMP_LT_OQ)));
        }
        const int bits = _mm256_movemask_pd(in);
        mask[i] = bits & 1;
        mask[i + 1] = (bits >> 1) & 1;
        mask[i + 2] = (bits >> 2) & 1;
        mask[i + 3] = (bits >> 3) & 1;
    }
    if (i < n) scalar::points_inside(box, xs.subspan(i), ys.subspan(i), inclusive, mask.subspan(i));
}

}  // namespace slender::simd::avx2

#else

#include <stdexcept>

namespace slender::simd::avx2 {

bool compiled() noexcept { return false; }

void iou_row(const AABox&, const BoxColumns&, std::size_t, std::size_t, std::span<double>) {
    throw std::logic_error("AVX2 kernels not compiled");
}

void points_inside(const AABox&, std::span<const double>, std::span<const double>, bool,
                   std::span<std::uint8_t>) {
    throw std::logic_error("AVX2 kernels not compiled");
}

}  // namespace slender::simd::avx2

#endif

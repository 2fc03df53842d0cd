#include "slender/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels/scalar_ops.hpp"

namespace slender {
namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double cross(const Point& o, const Point& a, const Point& b) noexcept {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool finite(const Point& p) noexcept { return std::isfinite(p.x) && std::isfinite(p.y); }

double shoelace(std::span<const Point> v) noexcept {
    double twice = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

}  // namespace

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    for (std::size_t i = 0, n = vertices_.size(); i < n; ++i) {
        if (!finite(vertices_[i])) throw GeometryError("polygon vertex is not finite");
        if (vertices_[i] == vertices_[(i + 1) % n])
            throw GeometryError("polygon has consecutive identical vertices");
    }
    if (shoelace(vertices_) == 0.0) throw GeometryError("degenerate polygon");
}

double Polygon::signed_area() const noexcept { return shoelace(vertices_); }
double Polygon::area() const noexcept { return std::abs(signed_area()); }

std::array<Point, 4> OrientedBox::corners() const noexcept {
    const double c = std::cos(angle), s = std::sin(angle);
    const double ux = 0.5 * w * c, uy = 0.5 * w * s;
    const double nx = -0.5 * h * s, ny = 0.5 * h * c;
    return {Point{center.x - ux - nx, center.y - uy - ny}, Point{center.x + ux - nx, center.y + uy - ny},
            Point{center.x + ux + nx, center.y + uy + ny}, Point{center.x - ux + nx, center.y - uy + ny}};
}

OrientedBox make_oriented_box(Point center, double w, double h, double angle) {
    if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h))
        throw GeometryError("oriented box needs positive finite extent");
    const double turns = std::floor(angle / kHalfPi);
    double a = angle - turns * kHalfPi;
    bool swap = std::fmod(std::abs(turns), 2.0) == 1.0;
    if (a >= kHalfPi) {
        a -= kHalfPi;
        swap = !swap;
    }
    if (a < 0.0) a = 0.0;
    if (swap) std::swap(w, h);
    return OrientedBox{center, w, h, a};
}

Slenderness::Slenderness(double value) : value_(value) {
    if (!(value > 0.0) || !(value <= 1.0)) throw GeometryError("slenderness must lie in (0, 1]");
}

std::string_view to_string(SlendernessBin bin) noexcept {
    switch (bin) {
        case SlendernessBin::XS: return "XS";
        case SlendernessBin::S: return "S";
        case SlendernessBin::R: return "R";
    }
    return "?";
}

std::string_view to_string(AspectGroup group) noexcept {
    switch (group) {
        case AspectGroup::XT: return "XT";
        case AspectGroup::T: return "T";
        case AspectGroup::M: return "M";
        case AspectGroup::W: return "W";
        case AspectGroup::XW: return "XW";
    }
    return "?";
}

std::optional<SlendernessBin> parse_bin(std::string_view text) noexcept {
    for (auto b : kAllBins)
        if (to_string(b) == text) return b;
    return std::nullopt;
}

std::vector<Point> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    for (const auto& p : pts)
        if (!finite(p)) throw GeometryError("point is not finite");
    std::sort(pts.begin(), pts.end(),
              [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) throw GeometryError("degenerate polygon");

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);  // last point repeats the first
    if (hull.size() < 3) throw GeometryError("degenerate polygon");
    return hull;
}

Polygon convex_hull(const Polygon& poly) { return Polygon(convex_hull(std::span(poly.vertices()))); }

OrientedBox min_area_rect(std::span<const Point> points) {
    const std::vector<Point> hull = convex_hull(points);
    const std::size_t n = hull.size();

    // Extremes relative to the current edge: far along the edge (right),
    // far from the edge (top), far against the edge (left). All three only
    // move forward as the edge rotates counter-clockwise.
    std::size_t right = 0, top = 0, left = 0;
    double best_area = 0.0;
    OrientedBox best;
    bool have_best = false;

    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = hull[i];
        const Point& b = hull[(i + 1) % n];
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len = std::hypot(ex, ey);
        const double ux = ex / len, uy = ey / len;
        auto along = [&](std::size_t k) { return (hull[k].x - a.x) * ux + (hull[k].y - a.y) * uy; };
        auto away = [&](std::size_t k) { return (hull[k].x - a.x) * -uy + (hull[k].y - a.y) * ux; };

        if (i == 0) {
            for (std::size_t k = 1; k < n; ++k) {
                if (along(k) > along(right)) right = k;
                if (away(k) > away(top)) top = k;
                if (along(k) < along(left)) left = k;
            }
        } else {
            for (std::size_t step = 0; step < n && along((right + 1) % n) > along(right); ++step)
                right = (right + 1) % n;
            for (std::size_t step = 0; step < n && away((top + 1) % n) > away(top); ++step)
                top = (top + 1) % n;
            for (std::size_t step = 0; step < n && along((left + 1) % n) < along(left); ++step)
                left = (left + 1) % n;
        }

        const double lo = along(left), hi = along(right), height = away(top);
        const double width = hi - lo;
        const double area = width * height;
        const double mid = 0.5 * (lo + hi);
        const Point center{a.x + ux * mid - uy * 0.5 * height, a.y + uy * mid + ux * 0.5 * height};
        const OrientedBox candidate = make_oriented_box(center, width, height, std::atan2(uy, ux));

        // Equal-area rectangles (every edge of an acute triangle, say) can
        // differ in shape. Preferring the squarer one keeps s independent of
        // the polygon's orientation; the angle only settles the pose.
        bool take = !have_best;
        if (!take) {
            const double tol = 1e-9 * std::max(area, best_area);
            if (area < best_area - tol) {
                take = true;
            } else if (area <= best_area + tol) {
                const double s_new = std::min(width, height) / std::max(width, height);
                const double s_old = std::min(best.w, best.h) / std::max(best.w, best.h);
                take = s_new > s_old + 1e-12 || (s_new >= s_old - 1e-12 && candidate.angle < best.angle);
            }
        }
        if (take) {
            best = candidate;
            best_area = area;
            have_best = true;
        }
    }
    return best;
}

OrientedBox min_area_rect(const Polygon& poly) { return min_area_rect(std::span(poly.vertices())); }

Slenderness slenderness(const OrientedBox& box) {
    if (!(box.w > 0.0) || !(box.h > 0.0)) throw GeometryError("slenderness of an empty box");
    return Slenderness(std::min(box.w, box.h) / std::max(box.w, box.h));
}

Slenderness slenderness(const AABox& box) {
    if (box.degenerate()) throw GeometryError("slenderness of an empty box");
    return Slenderness(std::min(box.w, box.h) / std::max(box.w, box.h));
}

SlendernessBin classify_slenderness(Slenderness s) noexcept {
    if (s.value() < 1.0 / 5.0) return SlendernessBin::XS;
    if (s.value() < 1.0 / 3.0) return SlendernessBin::S;
    return SlendernessBin::R;
}

AspectGroup classify_aspect(double r, const AspectCuts& cuts) {
    if (!(r > 0.0) || !std::isfinite(r)) throw GeometryError("aspect ratio must be positive and finite");
    if (r <= cuts.xt_max) return AspectGroup::XT;
    if (r <= cuts.t_max) return AspectGroup::T;
    if (r < cuts.w_min) return AspectGroup::M;
    if (r < cuts.xw_min) return AspectGroup::W;
    return AspectGroup::XW;
}

double iou(const AABox& a, const AABox& b) noexcept {
    return simd::detail::iou_corners(a.x, a.y, a.x2(), a.y2(), a.area(), b.x, b.y, b.x2(), b.y2(), b.area());
}

double giou(const AABox& a, const AABox& b) noexcept {
    const double ax2 = a.x2(), ay2 = a.y2(), bx2 = b.x2(), by2 = b.y2();
    const double iw = std::max(std::min(ax2, bx2) - std::max(a.x, b.x), 0.0);
    const double ih = std::max(std::min(ay2, by2) - std::max(a.y, b.y), 0.0);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    const double hull = (std::max(ax2, bx2) - std::min(a.x, b.x)) * (std::max(ay2, by2) - std::min(a.y, b.y));
    if (!(hull > 0.0)) return 0.0;
    const double overlap = uni > 0.0 ? inter / uni : 0.0;
    return overlap - (hull - uni) / hull;
}

AABox pseudo_box(std::span<const Point> points) {
    if (points.empty()) throw GeometryError("pseudo box of an empty point set");
    double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
    for (const auto& p : points.subspan(1)) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return AABox{x0, y0, x1 - x0, y1 - y0};
}

Polygon rotate(const Polygon& poly, double radians, Point pivot) {
    const double c = std::cos(radians), s = std::sin(radians);
    std::vector<Point> out;
    out.reserve(poly.size());
    for (const auto& p : poly.vertices()) {
        const double dx = p.x - pivot.x, dy = p.y - pivot.y;
        out.push_back({pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy});
    }
    return Polygon(std::move(out));
}

}  // namespace slender

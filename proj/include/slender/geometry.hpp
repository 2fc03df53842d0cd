#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "slender/error.hpp"

namespace slender {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Simple polygon with at least three vertices and non-zero signed area.
/// Construction validates; a Polygon that exists is always usable.
class Polygon {
public:
    explicit Polygon(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }

    /// Shoelace area, positive for counter-clockwise order.
    double signed_area() const noexcept;
    double area() const noexcept;

private:
    std::vector<Point> vertices_;
};

/// Axis-aligned box in COCO convention: top-left corner plus extent.
struct AABox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double x2() const noexcept { return x + w; }
    double y2() const noexcept { return y + h; }
    /// Area from corner differences, the form every IoU routine uses.
    double area() const noexcept { return (x2() - x) * (y2() - y); }
    double center_x() const noexcept { return x + 0.5 * w; }
    double center_y() const noexcept { return y + 0.5 * h; }
    /// Width over height, r_b.
    double aspect_ratio() const noexcept { return w / h; }
    bool degenerate() const noexcept { return !(w > 0.0) || !(h > 0.0); }

    friend bool operator==(const AABox&, const AABox&) = default;
};

/// Rotated rectangle. `angle` is the direction of the `w` side, kept in
/// [0, pi/2); a quarter turn is absorbed by swapping w and h.
struct OrientedBox {
    Point center;
    double w = 0.0;
    double h = 0.0;
    double angle = 0.0;

    double area() const noexcept { return w * h; }
    std::array<Point, 4> corners() const noexcept;
};

/// Builds an OrientedBox and normalizes its angle into [0, pi/2).
OrientedBox make_oriented_box(Point center, double w, double h, double angle);

/// min(w, h) / max(w, h) of an object's minimum-area rectangle, in (0, 1].
class Slenderness {
public:
    explicit Slenderness(double value);
    double value() const noexcept { return value_; }

    friend bool operator==(const Slenderness&, const Slenderness&) = default;

private:
    double value_;
};

enum class SlendernessBin : std::uint8_t { XS = 0, S = 1, R = 2 };
inline constexpr std::array<SlendernessBin, 3> kAllBins = {SlendernessBin::XS, SlendernessBin::S,
                                                           SlendernessBin::R};

enum class AspectGroup : std::uint8_t { XT = 0, T = 1, M = 2, W = 3, XW = 4 };
inline constexpr std::array<AspectGroup, 5> kAllAspectGroups = {
    AspectGroup::XT, AspectGroup::T, AspectGroup::M, AspectGroup::W, AspectGroup::XW};

std::string_view to_string(SlendernessBin bin) noexcept;
std::string_view to_string(AspectGroup group) noexcept;
std::optional<SlendernessBin> parse_bin(std::string_view text) noexcept;

/// Cut points on r_b = w_b / h_b. Groups are
///   XT: r <= xt_max, T: (xt_max, t_max], M: (t_max, w_min),
///   W: [w_min, xw_min), XW: r >= xw_min.
struct AspectCuts {
    double xt_max = 1.0 / 5.0;
    double t_max = 1.0 / 3.0;
    double w_min = 3.0;
    double xw_min = 5.0;
};

// ---------------------------------------------------------------------------
// Operations

/// Convex hull (monotone chain) in counter-clockwise order, collinear points
/// removed, starting from the lowest-x (then lowest-y) vertex.
/// Throws GeometryError("degenerate polygon") when fewer than three
/// non-collinear points remain.
std::vector<Point> convex_hull(std::span<const Point> points);
Polygon convex_hull(const Polygon& poly);

/// Minimum-area enclosing rectangle by rotating calipers over the hull.
/// One side is always collinear with a hull edge. Among equal areas the
/// squarest rectangle wins, then the smallest normalized angle.
OrientedBox min_area_rect(std::span<const Point> points);
OrientedBox min_area_rect(const Polygon& poly);

Slenderness slenderness(const OrientedBox& box);
/// Slenderness of an axis-aligned box, min(w_b, h_b) / max(w_b, h_b).
Slenderness slenderness(const AABox& box);

/// XS: s < 1/5, S: 1/5 <= s < 1/3, R: s >= 1/3.
SlendernessBin classify_slenderness(Slenderness s) noexcept;

/// Throws GeometryError when r_b <= 0 or is not finite.
AspectGroup classify_aspect(double aspect_ratio, const AspectCuts& cuts = {});

double iou(const AABox& a, const AABox& b) noexcept;
double giou(const AABox& a, const AABox& b) noexcept;

/// Tightest axis-aligned box over a point set (min-max). A single point or a
/// collinear axis-parallel set yields a zero-extent box; check degenerate().
/// Throws GeometryError on an empty set.
AABox pseudo_box(std::span<const Point> points);

Polygon rotate(const Polygon& poly, double radians, Point pivot = {});

}  // namespace slender

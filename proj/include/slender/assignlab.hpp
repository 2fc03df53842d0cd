#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slender/cocoio.hpp"
#include "slender/geometry.hpp"

// Geometric simulation of label assignment: which anchors or grid locations
// a strategy would mark positive for each ground-truth box. No training.

namespace slender {

struct AnchorGridConfig {
    std::vector<int> strides{8, 16, 32, 64, 128};
    std::vector<double> scales{1.0, 1.2599210498948732, 1.5874010519681994};  // 2^0, 2^(1/3), 2^(2/3)
    /// height / width
    std::vector<double> ratios{0.5, 1.0, 2.0};
    /// Anchor base size is base_size_factor * stride.
    double base_size_factor = 4.0;

    /// Throws UsageError unless every entry is positive.
    void validate() const;
};

struct GridLocation {
    double x = 0.0;
    double y = 0.0;
    int level = 0;
    int stride = 0;
};

/// Cell centers of every pyramid level, flattened level by level, row-major
/// within a level. Location ids index this flat order.
class LocationGrid {
public:
    struct Level {
        int stride = 0;
        int cols = 0;
        int rows = 0;
        std::size_t offset = 0;
    };

    LocationGrid(std::span<const int> strides, int image_w, int image_h);

    std::size_t size() const noexcept { return xs_.size(); }
    const std::vector<Level>& levels() const noexcept { return levels_; }
    std::span<const double> xs() const noexcept { return xs_; }
    std::span<const double> ys() const noexcept { return ys_; }
    GridLocation location(std::size_t id) const;
    std::size_t id(std::size_t level, int col, int row) const noexcept;

private:
    std::vector<Level> levels_;
    std::vector<double> xs_, ys_;
};

struct Anchor {
    GridLocation location;
    AABox box;
};

/// Per level, per cell, |scales| x |ratios| anchors centered on the cell,
/// with w * h = (base_size_factor * stride * scale)^2 and h / w = ratio.
std::vector<Anchor> build_anchors(const AnchorGridConfig& cfg, int image_w, int image_h);

struct GtBox {
    std::int64_t id = 0;
    AABox box;
};

enum class LabelKind : std::uint8_t { negative, positive, ignore };

struct Label {
    LabelKind kind = LabelKind::negative;
    std::int64_t gt_id = -1;  // set when positive
};

struct Assignment {
    /// One label per anchor or location.
    std::vector<Label> labels;
    /// Positive anchor/location ids per gt id; every gt has an entry.
    std::map<std::int64_t, std::vector<std::size_t>> positives;
    /// Gts that lost their only candidate location to another gt.
    std::vector<std::int64_t> displaced;

    std::size_t positive_count(std::int64_t gt_id) const;
};

struct IouAssignOptions {
    double pos_thr = 0.5;
    double neg_thr = 0.4;
    /// Force each gt's best anchor positive even below pos_thr.
    bool force_match = false;

    void validate() const;
};

/// Max-IoU anchor assignment: positive (argmax gt, ties to the lower gt id)
/// when the best IoU >= pos_thr, negative below neg_thr, ignore between.
Assignment assign_iou(std::span<const Anchor> anchors, std::span<const GtBox> gts, const IouAssignOptions& opts = {});

/// Locations inside a gt box are positive; a location inside several boxes
/// goes to the smallest one (ties to the lower gt id). Border points count as
/// inside only when `inclusive`.
Assignment assign_inbox(const LocationGrid& grid, std::span<const GtBox> gts, bool inclusive = false);

/// Pyramid level whose anchor base size is closest to sqrt(area) on a log
/// scale; ties go to the finer level.
std::size_t select_level(const LocationGrid& grid, double area, double base_size_factor);

/// One positive per gt: the location on its selected level nearest to the
/// box center (ties to lower row, then lower column). When two gts pick the
/// same location it carries the smaller gt and the other is displaced.
Assignment assign_nearest_center(const LocationGrid& grid, std::span<const GtBox> gts, double base_size_factor = 4.0);

// ---------------------------------------------------------------------------
// Center priors

struct BorderDistances {
    double l = 0.0;
    double r = 0.0;
    double t = 0.0;
    double b = 0.0;
};

/// Distances from `p` to the four borders of `box`; negative when outside.
BorderDistances border_distances(const AABox& box, Point p) noexcept;

/// sqrt(min(l,r)/max(l,r) * min(t,b)/max(t,b)). Throws GeometryError on
/// negative distances or a collapsed box (l + r == 0 or t + b == 0).
double centerness(const BorderDistances& d);

/// The same product raised to the object's slenderness instead of 1/2;
/// decays more slowly for slender objects.
double slender_centerness(const BorderDistances& d, Slenderness s);

// ---------------------------------------------------------------------------
// Diagnosis

enum class Strategy : std::uint8_t { iou, inbox, nearest_center };

std::string_view to_string(Strategy s) noexcept;
std::optional<Strategy> parse_strategy(std::string_view text) noexcept;

struct DiagnoseOptions {
    AnchorGridConfig grid;
    IouAssignOptions iou;
    bool inbox_inclusive = false;
    unsigned threads = 0;
    /// Histogram buckets 0 .. cap-1 plus one bucket for >= cap.
    std::size_t histogram_cap = 10;
};

struct StrategyBinStats {
    Strategy strategy = Strategy::iou;
    /// "XS", "S", "R" or "all".
    std::string bin;
    std::size_t count = 0;
    double mean_positives = 0.0;
    double zero_positive_fraction = 0.0;
    std::size_t displaced = 0;
    std::vector<std::size_t> histogram;
};

struct AssignmentReport {
    /// Ordered by bin (XS, S, R, all), then strategy name.
    std::vector<StrategyBinStats> rows;
    std::optional<std::uint64_t> seed;

    const StrategyBinStats* find(Strategy s, std::string_view bin) const noexcept;
};

/// Runs every strategy over every image of a slenderness-annotated dataset
/// and aggregates positives per gt by slenderness bin. Crowd annotations are
/// left out.
AssignmentReport diagnose(const Dataset& ds, std::span<const Strategy> strategies, const DiagnoseOptions& opts = {});

std::string assignment_report_json(const AssignmentReport& report);
/// strategy,bin,mean_positives,zero_positive_fraction,count
std::string assignment_report_csv(const AssignmentReport& report);

// ---------------------------------------------------------------------------
// Synthetic scenes

/// One generator term:
///   bars:WxH:N          N axis-aligned W x H bars, randomly turned upright
///   squares:S:N         N S x S squares
///   slender:N:SMIN:SMAX N rectangles, s uniform in [SMIN, SMAX], long side
///                       uniform in [48, 256], random orientation
struct SceneItem {
    enum class Kind : std::uint8_t { bars, squares, slender } kind = Kind::bars;
    double w = 0.0;
    double h = 0.0;
    std::size_t count = 0;
    double s_min = 0.0;
    double s_max = 0.0;
};

/// Throws UsageError on malformed text.
SceneItem parse_scene_item(std::string_view text);

/// Seeded scene set: every object sits in its own tile, eight tiles per
/// image, one category "object", rectangle polygons as segmentation.
Dataset synthetic_scenes(std::span<const SceneItem> items, std::uint64_t seed);

}  // namespace slender

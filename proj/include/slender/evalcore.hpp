#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slender/cocoio.hpp"
#include "slender/geometry.hpp"

namespace slender {

enum class StratumKind : std::uint8_t { all, slenderness, aspect, area, category };

std::string_view to_string(StratumKind kind) noexcept;
std::optional<StratumKind> parse_stratum_kind(std::string_view text) noexcept;

/// Inclusive object-area interval in px^2.
struct AreaRange {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

/// small [0, 32^2], medium [32^2, 96^2], large [96^2, 1e10].
std::vector<AreaRange> coco_area_ranges();

/// lo, lo + step, ... up to hi inclusive, each value rounded to 1e-9 so that
/// 0.5:0.95:0.05 yields exactly 0.5, 0.55, ..., 0.95.
std::vector<double> iou_range(double lo, double hi, double step);

/// Parses "lo:hi:step" or a single value. Throws UsageError.
std::vector<double> parse_iou_range(std::string_view text);

inline constexpr std::size_t kUnlimitedDets = std::numeric_limits<std::size_t>::max();

struct EvalConfig {
    std::vector<double> iou_thresholds = iou_range(0.5, 0.95, 0.05);
    /// Per image and category, applied after sorting by descending score.
    std::size_t max_dets = 100;
    std::set<StratumKind> strata{StratumKind::slenderness, StratumKind::aspect, StratumKind::area,
                                 StratumKind::category};
    /// Strata that also report AP. Slenderness is never allowed here.
    std::set<StratumKind> ap_strata{StratumKind::all, StratumKind::aspect, StratumKind::area,
                                    StratumKind::category};
    std::vector<AreaRange> area_ranges = coco_area_ranges();
    AspectCuts aspect_cuts;
    unsigned threads = 0;

    /// Throws UsageError on a bad threshold list or max_dets, and
    /// UndefinedMetricError when AP is requested per slenderness bin.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Matching

struct GtRef {
    std::int64_t id = 0;
    AABox box;
    /// Crowd or out-of-stratum: absorbs detections without counting.
    bool ignore = false;
};

struct DetRef {
    std::int64_t id = 0;
    AABox box;
    double score = 0.0;
    /// False when the detection itself falls outside the stratum; an
    /// unmatched out-of-stratum detection is ignored instead of counted FP.
    bool in_stratum = true;
};

enum class Outcome : std::uint8_t { false_positive = 0, true_positive = 1, ignored = 2 };

struct DetOutcome {
    std::int64_t detection_id = 0;
    double score = 0.0;
    Outcome outcome = Outcome::false_positive;
    std::optional<std::int64_t> matched_gt;
};

/// Matching of one image and category.
struct MatchResult {
    std::vector<double> thresholds;
    /// per_threshold[t]: detections in descending score order after the
    /// max_dets cap.
    std::vector<std::vector<DetOutcome>> per_threshold;
    /// unmatched[t]: non-ignored gt ids without a match at threshold t.
    std::vector<std::vector<std::int64_t>> unmatched;
    std::vector<std::int64_t> ignored_gt;
    std::size_t num_gt = 0;  // non-ignored
};

/// Greedy matching: detections by (score desc, id asc) each take the
/// unmatched non-ignored gt with the highest IoU >= threshold, ties to the
/// lower gt id. A detection that only reaches an ignore gt is ignored.
MatchResult match_detections(std::span<const GtRef> gt, std::span<const DetRef> dt, const EvalConfig& cfg);

/// 101-point interpolated AP over pooled outcomes of one category at one
/// threshold. nullopt when num_gt == 0.
std::optional<double> average_precision(std::span<const DetOutcome> outcomes, std::size_t num_gt);

/// AP for threshold index t over per-image matches of one category.
std::optional<double> average_precision(std::span<const MatchResult> matches, std::size_t t);

/// Mean over thresholds of matched / non-ignored gt. nullopt without gt.
std::optional<double> average_recall(std::span<const MatchResult> matches);

// ---------------------------------------------------------------------------
// Evaluation

struct StratumMetrics {
    std::string name;
    StratumKind kind = StratumKind::all;
    std::size_t gt_count = 0;
    bool ap_reported = false;
    std::optional<double> ap;
    std::optional<double> ar;
    std::vector<std::optional<double>> ap_per_iou;
    std::vector<std::optional<double>> ar_per_iou;
};

struct EvalReport {
    std::vector<double> iou_thresholds;
    std::size_t max_dets = 0;
    std::optional<double> map;
    std::optional<double> mar;
    /// "all" first, then slenderness, aspect, area and category strata.
    std::vector<StratumMetrics> strata;

    const StratumMetrics* find(std::string_view name) const noexcept;
};

/// COCO-style evaluation with slenderness, aspect-group, area and category
/// strata. Out-of-stratum gt act as ignore regions. Throws UsageError when
/// `ds` has not been slenderness-annotated.
EvalReport evaluate(const Dataset& ds, const DetectionSet& dt, const EvalConfig& cfg = {});

std::string eval_report_json(const EvalReport& report);
/// stratum,metric,value
std::string eval_report_csv(const EvalReport& report);
/// Bar chart of AR per slenderness bin.
std::string ar_bars_svg(const EvalReport& report);

// ---------------------------------------------------------------------------
// Duplicate removal

/// Greedy NMS: keep the best remaining detection by (score desc, id asc) and
/// drop every other with IoU > iou_threshold. Class-wise mode only
/// suppresses within a category. Survivors come back in (score desc, id asc)
/// order. Throws UsageError unless 0 < iou_threshold < 1.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, bool class_agnostic);

}  // namespace slender

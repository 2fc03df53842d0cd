#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slender/geometry.hpp"

namespace slender {

enum class ImageSource : std::uint8_t { base, extra };

struct ImageRecord {
    std::int64_t id = 0;
    int width = 0;
    int height = 0;
    std::string file_name;
    ImageSource source = ImageSource::base;
};

/// Where an annotation's slenderness came from. `skipped` marks a polygon
/// that turned out degenerate; such annotations carry no slenderness.
enum class SlendernessSource : std::uint8_t { none, polygon, bbox, skipped };

std::string_view to_string(SlendernessSource source) noexcept;

struct Annotation {
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::int64_t category_id = 0;
    AABox bbox;
    /// Polygon parts as raw vertex lists. Run-length masks are not kept.
    std::vector<std::vector<Point>> segmentation;
    double area = 0.0;
    bool iscrowd = false;
    std::optional<Slenderness> s;
    std::optional<SlendernessBin> bin;
    SlendernessSource s_source = SlendernessSource::none;

    /// Segmentation area when recorded, else the box area.
    double effective_area() const noexcept { return area > 0.0 ? area : bbox.w * bbox.h; }
};

struct Category {
    std::int64_t id = 0;
    std::string name;
};

/// COCO-style ground truth. Loaders guarantee referential integrity.
struct Dataset {
    std::vector<ImageRecord> images;
    std::vector<Annotation> annotations;
    std::vector<Category> categories;

    const Category* find_category(std::int64_t id) const noexcept;
    const ImageRecord* find_image(std::int64_t id) const noexcept;
};

struct Detection {
    /// Position in the results file; breaks score ties.
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::int64_t category_id = 0;
    AABox bbox;
    double score = 0.0;
};

/// Detections grouped per image, each group in file order.
struct DetectionSet {
    std::map<std::int64_t, std::vector<Detection>> per_image;

    std::size_t size() const noexcept;
    /// All detections ordered by id.
    std::vector<Detection> flatten() const;
};

/// Non-fatal findings collected while loading or transforming data.
struct Diagnostics {
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Loading and writing

/// Parses a COCO annotation document and verifies referential integrity.
/// Crowd annotations are kept and flagged. Annotations whose box has no
/// extent are dropped with a warning. Previously computed slenderness
/// fields are restored when present.
Dataset load_ground_truth(std::istream& in, Diagnostics* diag = nullptr);
Dataset load_ground_truth_file(const std::string& path, Diagnostics* diag = nullptr);

/// Parses a COCO results array without checking it against a dataset.
DetectionSet parse_detections(std::istream& in, Diagnostics* diag = nullptr);
DetectionSet load_detections(std::istream& in, const Dataset& ds, Diagnostics* diag = nullptr);
DetectionSet load_detections_file(const std::string& path, const Dataset& ds, Diagnostics* diag = nullptr);

/// Throws IntegrityError when a detection names an image or category that
/// `ds` does not contain.
void validate_detections(const DetectionSet& dt, const Dataset& ds);

/// COCO annotation document, plus `source` on images and the slenderness
/// fields on annotated annotations.
std::string write_ground_truth(const Dataset& ds);
/// COCO results array in id order.
std::string write_detections(const std::vector<Detection>& detections);

// ---------------------------------------------------------------------------
// Slenderness annotation

/// Adds s and its bin to every non-crowd annotation: from the minimum-area
/// rectangle of all polygon vertices when a segmentation exists, else from
/// the box (source = bbox). Output annotations are ordered by id.
Dataset annotate_slenderness(const Dataset& ds, unsigned threads = 0);

/// True when every non-crowd annotation has been through annotate_slenderness.
bool is_annotated(const Dataset& ds) noexcept;

/// annotation_id,s,bin,source for every non-crowd annotation.
std::string slenderness_csv(const Dataset& ds);

// ---------------------------------------------------------------------------
// Mixing

enum class CategoryPolicy : std::uint8_t { intersect_by_name };

struct MixConfig {
    /// Extra images qualify when they hold an annotation whose bin is at or
    /// below this one (XS < S < R).
    SlendernessBin filter_bin = SlendernessBin::XS;
    CategoryPolicy category_policy = CategoryPolicy::intersect_by_name;
    /// Added to extra image and annotation ids. When unset, the smallest
    /// power of ten above every base id is used.
    std::optional<std::int64_t> id_offset;
};

/// Base plus every qualifying extra image, with extra categories mapped onto
/// base categories by exact name and unmatched ones dropped.
Dataset mix_datasets(const Dataset& base, const Dataset& extra, const MixConfig& cfg = {});

// ---------------------------------------------------------------------------
// Sampling weights

struct SampleRates {
    double xs = 1.0;
    double s = 1.0;
    double r = 1.0;

    double rate(SlendernessBin bin) const noexcept;
    /// Throws UsageError unless every rate is finite and >= 1.
    void validate() const;
};

enum class WeightAggregation : std::uint8_t { image_max, image_mean };

/// Per-image oversampling weight from the bins of its annotations.
/// image_max: the largest bin rate present; image_mean: the mean over
/// annotations. Images without binned annotations get 1.
std::map<std::int64_t, double> sampling_weights(const Dataset& ds, const SampleRates& rates,
                                                WeightAggregation aggregation = WeightAggregation::image_max);

std::string weights_csv(const std::map<std::int64_t, double>& weights);

// ---------------------------------------------------------------------------
// Distribution

struct BinHistogram {
    std::array<std::size_t, 3> counts{};

    std::size_t total() const noexcept { return counts[0] + counts[1] + counts[2]; }
    /// Percentages of total(); all zero for an empty histogram.
    std::array<double, 3> percent() const noexcept;
};

struct DistributionReport {
    std::size_t images = 0;
    /// Non-crowd annotations with a slenderness.
    BinHistogram non_crowd;
    /// non_crowd plus crowd annotations (crowd slenderness from polygon or box).
    BinHistogram with_crowd;
    std::size_t crowd = 0;
    std::size_t skipped = 0;
    std::size_t from_polygon = 0;
    std::size_t from_bbox = 0;
};

DistributionReport distribution_report(const Dataset& ds);
std::string distribution_json(const DistributionReport& report);
std::string distribution_csv(const DistributionReport& report);

}  // namespace slender

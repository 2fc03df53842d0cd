#include "slender/assignlab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <unordered_map>

#include <json.hpp>

#include "slender/error.hpp"
#include "slender/parallel.hpp"
#include "slender/simd.hpp"
#include "slender/textio.hpp"

namespace slender {
namespace {

std::vector<GtBox> sorted_by_id(std::span<const GtBox> gts) {
    std::vector<GtBox> out(gts.begin(), gts.end());
    std::sort(out.begin(), out.end(), [](const GtBox& a, const GtBox& b) { return a.id < b.id; });
    return out;
}

void collect_positives(Assignment& a, std::span<const GtBox> gts) {
    for (const auto& g : gts) a.positives[g.id];
    for (std::size_t i = 0; i < a.labels.size(); ++i)
        if (a.labels[i].kind == LabelKind::positive) a.positives[a.labels[i].gt_id].push_back(i);
}

int cells(int extent, int stride) { return (extent + stride - 1) / stride; }

}  // namespace

void AnchorGridConfig::validate() const {
    if (strides.empty() || scales.empty() || ratios.empty()) throw UsageError("anchor grid needs strides, scales and ratios");
    for (int s : strides)
        if (s <= 0) throw UsageError("strides must be positive");
    for (double v : scales)
        if (!(v > 0.0)) throw UsageError("scales must be positive");
    for (double v : ratios)
        if (!(v > 0.0)) throw UsageError("ratios must be positive");
    if (!(base_size_factor > 0.0)) throw UsageError("base size factor must be positive");
}

LocationGrid::LocationGrid(std::span<const int> strides, int image_w, int image_h) {
    if (image_w <= 0 || image_h <= 0) throw UsageError("image dimensions must be positive");
    for (int stride : strides) {
        if (stride <= 0) throw UsageError("strides must be positive");
        Level lv{stride, cells(image_w, stride), cells(image_h, stride), xs_.size()};
        for (int row = 0; row < lv.rows; ++row)
            for (int col = 0; col < lv.cols; ++col) {
                xs_.push_back(stride / 2.0 + static_cast<double>(col) * stride);
                ys_.push_back(stride / 2.0 + static_cast<double>(row) * stride);
            }
        levels_.push_back(lv);
    }
}

GridLocation LocationGrid::location(std::size_t id) const {
    std::size_t lv = 0;
    while (lv + 1 < levels_.size() && levels_[lv + 1].offset <= id) ++lv;
    return GridLocation{xs_.at(id), ys_.at(id), static_cast<int>(lv), levels_[lv].stride};
}

std::size_t LocationGrid::id(std::size_t level, int col, int row) const noexcept {
    const Level& lv = levels_[level];
    return lv.offset + static_cast<std::size_t>(row) * static_cast<std::size_t>(lv.cols) + static_cast<std::size_t>(col);
}

std::vector<Anchor> build_anchors(const AnchorGridConfig& cfg, int image_w, int image_h) {
    cfg.validate();
    const LocationGrid grid(cfg.strides, image_w, image_h);
    std::vector<Anchor> anchors;
    anchors.reserve(grid.size() * cfg.scales.size() * cfg.ratios.size());
    for (std::size_t id = 0; id < grid.size(); ++id) {
        const GridLocation loc = grid.location(id);
        for (double scale : cfg.scales) {
            const double base = cfg.base_size_factor * loc.stride * scale;
            for (double ratio : cfg.ratios) {
                const double root = std::sqrt(ratio);
                const double w = base / root, h = base * root;
                anchors.push_back({loc, AABox{loc.x - w / 2.0, loc.y - h / 2.0, w, h}});
            }
        }
    }
    return anchors;
}

std::size_t Assignment::positive_count(std::int64_t gt_id) const {
    auto it = positives.find(gt_id);
    return it == positives.end() ? 0 : it->second.size();
}

void IouAssignOptions::validate() const {
    if (!(neg_thr > 0.0) || !(neg_thr <= pos_thr) || !(pos_thr < 1.0))
        throw UsageError("IoU assignment needs 0 < neg_thr <= pos_thr < 1");
}

Assignment assign_iou(std::span<const Anchor> anchors, std::span<const GtBox> gts_in, const IouAssignOptions& opts) {
    opts.validate();
    const auto gts = sorted_by_id(gts_in);
    const std::size_t n = anchors.size();
    simd::BoxColumns cols;
    for (const auto& a : anchors) cols.push_back(a.box);

    std::vector<double> best(n, -1.0), row(n);
    std::vector<int> owner(n, -1);
    std::vector<std::size_t> forced;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        simd::iou_row(gts[g].box, cols, 0, n, row);
        std::size_t top = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (row[i] > best[i]) {
                best[i] = row[i];
                owner[i] = static_cast<int>(g);
            }
            if (row[i] > row[top]) top = i;
        }
        forced.push_back(n > 0 && row[top] > 0.0 ? top : n);
    }

    Assignment out;
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (owner[i] >= 0 && best[i] >= opts.pos_thr)
            out.labels[i] = {LabelKind::positive, gts[static_cast<std::size_t>(owner[i])].id};
        else if (best[i] < opts.neg_thr)
            out.labels[i] = {LabelKind::negative, -1};
        else
            out.labels[i] = {LabelKind::ignore, -1};
    }
    if (opts.force_match)
        for (std::size_t g = 0; g < gts.size(); ++g)
            if (forced[g] < n) out.labels[forced[g]] = {LabelKind::positive, gts[g].id};
    collect_positives(out, gts);
    return out;
}

Assignment assign_inbox(const LocationGrid& grid, std::span<const GtBox> gts_in, bool inclusive) {
    const auto gts = sorted_by_id(gts_in);
    const std::size_t n = grid.size();
    std::vector<int> owner(n, -1);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t g = 0; g < gts.size(); ++g) {
        simd::points_inside(gts[g].box, grid.xs(), grid.ys(), inclusive, mask);
        const double area = gts[g].box.area();
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            if (owner[i] < 0 || area < gts[static_cast<std::size_t>(owner[i])].box.area()) owner[i] = static_cast<int>(g);
        }
    }
    Assignment out;
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (owner[i] >= 0) out.labels[i] = {LabelKind::positive, gts[static_cast<std::size_t>(owner[i])].id};
    collect_positives(out, gts);
    return out;
}

std::size_t select_level(const LocationGrid& grid, double area, double base_size_factor) {
    const auto& levels = grid.levels();
    if (levels.empty()) throw UsageError("location grid has no levels");
    // Log of a ratio rather than a difference of logs, so that scaling the
    // scene by a power of two leaves every gap bit-identical. Gaps within
    // rounding of each other count as a tie.
    const double side = std::sqrt(std::max(area, 1e-24));
    std::size_t best = 0;
    double best_gap = std::abs(std::log(base_size_factor * levels[0].stride / side));
    for (std::size_t lv = 1; lv < levels.size(); ++lv) {
        const double gap = std::abs(std::log(base_size_factor * levels[lv].stride / side));
        if (gap < best_gap - 1e-12) {
            best = lv;
            best_gap = gap;
        }
    }
    return best;
}

namespace {

// Nearest cell index along one axis for centers stride/2 + k*stride, k in
// [0, count); ties go to the lower index.
int nearest_cell(double v, int stride, int count) {
    const double k = (v - stride / 2.0) / stride;
    int lo = static_cast<int>(std::floor(k));
    lo = std::clamp(lo, 0, count - 1);
    const int hi = std::min(lo + 1, count - 1);
    const double dlo = std::abs(v - (stride / 2.0 + lo * stride));
    const double dhi = std::abs(v - (stride / 2.0 + hi * stride));
    return dhi < dlo ? hi : lo;
}

}  // namespace

Assignment assign_nearest_center(const LocationGrid& grid, std::span<const GtBox> gts_in, double base_size_factor) {
    const auto gts = sorted_by_id(gts_in);
    Assignment out;
    out.labels.resize(grid.size());
    std::unordered_map<std::size_t, std::size_t> claimed;  // location -> gt index
    std::vector<std::int64_t> displaced;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        const AABox& box = gts[g].box;
        const std::size_t lv = select_level(grid, box.area(), base_size_factor);
        const auto& level = grid.levels()[lv];
        const int col = nearest_cell(box.center_x(), level.stride, level.cols);
        const int row = nearest_cell(box.center_y(), level.stride, level.rows);
        const std::size_t loc = grid.id(lv, col, row);
        auto [it, fresh] = claimed.emplace(loc, g);
        if (!fresh) {
            const std::size_t other = it->second;
            if (box.area() < gts[other].box.area()) {
                displaced.push_back(gts[other].id);
                it->second = g;
            } else {
                displaced.push_back(gts[g].id);
            }
        }
    }
    for (const auto& [loc, g] : claimed) out.labels[loc] = {LabelKind::positive, gts[g].id};
    collect_positives(out, gts);
    std::sort(displaced.begin(), displaced.end());
    out.displaced = std::move(displaced);
    return out;
}

// ---------------------------------------------------------------------------

BorderDistances border_distances(const AABox& box, Point p) noexcept {
    return {p.x - box.x, box.x2() - p.x, p.y - box.y, box.y2() - p.y};
}

namespace {

double centerness_product(const BorderDistances& d) {
    if (d.l < 0.0 || d.r < 0.0 || d.t < 0.0 || d.b < 0.0) throw GeometryError("location lies outside the box");
    if (!(d.l + d.r > 0.0) || !(d.t + d.b > 0.0)) throw GeometryError("degenerate box: zero border distances");
    return (std::min(d.l, d.r) / std::max(d.l, d.r)) * (std::min(d.t, d.b) / std::max(d.t, d.b));
}

}  // namespace

double centerness(const BorderDistances& d) { return std::sqrt(centerness_product(d)); }

double slender_centerness(const BorderDistances& d, Slenderness s) {
    return std::pow(centerness_product(d), s.value());
}

// ---------------------------------------------------------------------------

std::string_view to_string(Strategy s) noexcept {
    switch (s) {
        case Strategy::iou: return "iou";
        case Strategy::inbox: return "inbox";
        case Strategy::nearest_center: return "nearest_center";
    }
    return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) noexcept {
    for (auto s : {Strategy::iou, Strategy::inbox, Strategy::nearest_center})
        if (to_string(s) == text) return s;
    if (text == "center") return Strategy::nearest_center;
    return std::nullopt;
}

const StrategyBinStats* AssignmentReport::find(Strategy s, std::string_view bin) const noexcept {
    for (const auto& r : rows)
        if (r.strategy == s && r.bin == bin) return &r;
    return nullptr;
}

AssignmentReport diagnose(const Dataset& ds, std::span<const Strategy> strategies_in, const DiagnoseOptions& opts) {
    if (!is_annotated(ds)) throw UsageError("dataset is not slenderness-annotated; run annotate_slenderness first");
    opts.grid.validate();
    opts.iou.validate();
    std::vector<Strategy> strategies(strategies_in.begin(), strategies_in.end());
    std::sort(strategies.begin(), strategies.end(),
              [](Strategy a, Strategy b) { return to_string(a) < to_string(b); });
    strategies.erase(std::unique(strategies.begin(), strategies.end()), strategies.end());

    std::unordered_map<std::int64_t, std::size_t> image_slot;
    for (std::size_t i = 0; i < ds.images.size(); ++i) image_slot.emplace(ds.images[i].id, i);
    std::vector<std::vector<const Annotation*>> per_image(ds.images.size());
    for (const auto& a : ds.annotations)
        if (!a.iscrowd) per_image[image_slot.at(a.image_id)].push_back(&a);

    // counts[image][strategy][k] = positives for the k-th gt of that image
    struct ImageResult {
        std::vector<std::vector<std::size_t>> positives;
        std::vector<std::vector<char>> displaced;
    };
    std::vector<ImageResult> results(ds.images.size());
    parallel_for(ds.images.size(), opts.threads, [&](std::size_t i) {
        const auto& anns = per_image[i];
        ImageResult& res = results[i];
        res.positives.assign(strategies.size(), std::vector<std::size_t>(anns.size()));
        res.displaced.assign(strategies.size(), std::vector<char>(anns.size()));
        if (anns.empty()) return;
        std::vector<GtBox> gts;
        for (const auto* a : anns) gts.push_back({a->id, a->bbox});
        const ImageRecord& img = ds.images[i];
        const LocationGrid grid(opts.grid.strides, img.width, img.height);
        for (std::size_t k = 0; k < strategies.size(); ++k) {
            Assignment asg;
            switch (strategies[k]) {
                case Strategy::iou:
                    asg = assign_iou(build_anchors(opts.grid, img.width, img.height), gts, opts.iou);
                    break;
                case Strategy::inbox: asg = assign_inbox(grid, gts, opts.inbox_inclusive); break;
                case Strategy::nearest_center: asg = assign_nearest_center(grid, gts, opts.grid.base_size_factor); break;
            }
            for (std::size_t g = 0; g < anns.size(); ++g) {
                res.positives[k][g] = asg.positive_count(anns[g]->id);
                res.displaced[k][g] =
                    std::binary_search(asg.displaced.begin(), asg.displaced.end(), anns[g]->id) ? 1 : 0;
            }
        }
    });

    const std::vector<std::string> bins{"XS", "S", "R", "all"};
    AssignmentReport report;
    for (const auto& bin : bins) {
        for (std::size_t k = 0; k < strategies.size(); ++k) {
            StrategyBinStats st;
            st.strategy = strategies[k];
            st.bin = bin;
            st.histogram.assign(opts.histogram_cap + 1, 0);
            std::size_t total_pos = 0, zero = 0;
            for (std::size_t i = 0; i < ds.images.size(); ++i) {
                for (std::size_t g = 0; g < per_image[i].size(); ++g) {
                    const Annotation* a = per_image[i][g];
                    if (bin != "all" && (!a->bin || to_string(*a->bin) != bin)) continue;
                    const std::size_t p = results[i].positives[k][g];
                    ++st.count;
                    total_pos += p;
                    zero += p == 0;
                    st.displaced += results[i].displaced[k][g];
                    ++st.histogram[std::min(p, opts.histogram_cap)];
                }
            }
            if (st.count > 0) {
                st.mean_positives = static_cast<double>(total_pos) / static_cast<double>(st.count);
                st.zero_positive_fraction = static_cast<double>(zero) / static_cast<double>(st.count);
            }
            report.rows.push_back(std::move(st));
        }
    }
    return report;
}

std::string assignment_report_json(const AssignmentReport& report) {
    nlohmann::ordered_json doc;
    doc["seed"] = report.seed ? nlohmann::ordered_json(*report.seed) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json j;
        j["strategy"] = std::string(to_string(r.strategy));
        j["bin"] = r.bin;
        j["count"] = r.count;
        j["mean_positives"] = r.mean_positives;
        j["zero_positive_fraction"] = r.zero_positive_fraction;
        j["displaced"] = r.displaced;
        j["positive_histogram"] = r.histogram;
        rows.push_back(std::move(j));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string assignment_report_csv(const AssignmentReport& report) {
    std::string out = "strategy,bin,mean_positives,zero_positive_fraction,count\n";
    for (const auto& r : report.rows)
        out += std::string(to_string(r.strategy)) + "," + r.bin + "," + format_number(r.mean_positives) + "," +
               format_number(r.zero_positive_fraction) + "," + std::to_string(r.count) + "\n";
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

template <typename T>
T number(std::string_view piece, std::string_view whole) {
    T v{};
    const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc() || ptr != piece.data() + piece.size())
        throw UsageError("bad synthetic scene term '" + std::string(whole) + "'");
    return v;
}

}  // namespace

SceneItem parse_scene_item(std::string_view text) {
    const auto parts = split(text, ':');
    SceneItem item;
    if (parts[0] == "bars" && parts.size() == 3) {
        const auto dims = split(parts[1], 'x');
        if (dims.size() != 2) throw UsageError("bars term needs WxH: '" + std::string(text) + "'");
        item.kind = SceneItem::Kind::bars;
        item.w = number<double>(dims[0], text);
        item.h = number<double>(dims[1], text);
        item.count = number<std::size_t>(parts[2], text);
    } else if (parts[0] == "squares" && parts.size() == 3) {
        item.kind = SceneItem::Kind::squares;
        item.w = item.h = number<double>(parts[1], text);
        item.count = number<std::size_t>(parts[2], text);
    } else if (parts[0] == "slender" && parts.size() == 4) {
        item.kind = SceneItem::Kind::slender;
        item.count = number<std::size_t>(parts[1], text);
        item.s_min = number<double>(parts[2], text);
        item.s_max = number<double>(parts[3], text);
        if (!(item.s_min > 0.0) || !(item.s_min <= item.s_max) || !(item.s_max <= 1.0))
            throw UsageError("slender term needs 0 < SMIN <= SMAX <= 1: '" + std::string(text) + "'");
    } else {
        throw UsageError("unknown synthetic scene term '" + std::string(text) + "'");
    }
    if (item.kind != SceneItem::Kind::slender && (!(item.w > 0.0) || !(item.h > 0.0)))
        throw UsageError("synthetic objects need positive size: '" + std::string(text) + "'");
    return item;
}

Dataset synthetic_scenes(std::span<const SceneItem> items, std::uint64_t seed) {
    constexpr int kTilesX = 4, kTilesY = 2, kMargin = 48;
    constexpr double kSlenderMin = 48.0, kSlenderMax = 256.0;
    std::mt19937_64 rng(seed);

    struct Obj {
        double w, h;
    };
    std::vector<Obj> objs;
    for (const auto& item : items) {
        for (std::size_t n = 0; n < item.count; ++n) {
            double w = item.w, h = item.h;
            if (item.kind == SceneItem::Kind::slender) {
                std::uniform_real_distribution<double> long_side(kSlenderMin, kSlenderMax);
                std::uniform_real_distribution<double> s_dist(item.s_min, item.s_max);
                w = std::round(long_side(rng));
                h = std::max(1.0, std::round(w * s_dist(rng)));
            }
            if (item.kind != SceneItem::Kind::squares && std::bernoulli_distribution(0.5)(rng)) std::swap(w, h);
            objs.push_back({w, h});
        }
    }

    double largest = 0.0;
    for (const auto& o : objs) largest = std::max({largest, o.w, o.h});
    const int tile = static_cast<int>(std::ceil((largest + 2.0 * kMargin) / 128.0)) * 128;

    Dataset ds;
    ds.categories.push_back({1, "object"});
    const std::size_t per_image = kTilesX * kTilesY;
    for (std::size_t i = 0; i < objs.size(); ++i) {
        const std::size_t image = i / per_image, slot = i % per_image;
        if (slot == 0)
            ds.images.push_back({static_cast<std::int64_t>(image + 1), kTilesX * tile, kTilesY * tile,
                                 "synthetic_" + std::to_string(image + 1) + ".png", ImageSource::base});
        const Obj& o = objs[i];
        const int tx = static_cast<int>(slot % kTilesX) * tile, ty = static_cast<int>(slot / kTilesX) * tile;
        const int span_x = std::max(0, tile - 2 * kMargin - static_cast<int>(std::ceil(o.w)));
        const int span_y = std::max(0, tile - 2 * kMargin - static_cast<int>(std::ceil(o.h)));
        const double x = tx + kMargin + std::uniform_int_distribution<int>(0, span_x)(rng);
        const double y = ty + kMargin + std::uniform_int_distribution<int>(0, span_y)(rng);
        Annotation a;
        a.id = static_cast<std::int64_t>(i + 1);
        a.image_id = static_cast<std::int64_t>(image + 1);
        a.category_id = 1;
        a.bbox = AABox{x, y, o.w, o.h};
        a.segmentation = {{{x, y}, {x + o.w, y}, {x + o.w, y + o.h}, {x, y + o.h}}};
        a.area = o.w * o.h;
        ds.annotations.push_back(std::move(a));
    }
    return ds;
}

}  // namespace slender

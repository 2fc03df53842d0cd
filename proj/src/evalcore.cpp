#include "slender/evalcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "slender/error.hpp"
#include "slender/parallel.hpp"
#include "slender/simd.hpp"
#include "slender/textio.hpp"

namespace slender {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kRecallPoints = 101;

bool det_before(double sa, std::int64_t ia, double sb, std::int64_t ib) noexcept {
    return sa > sb || (sa == sb && ia < ib);
}

std::vector<double> iou_matrix(std::span<const DetRef> dt, std::span<const GtRef> gt) {
    std::vector<AABox> boxes;
    boxes.reserve(gt.size());
    for (const auto& g : gt) boxes.push_back(g.box);
    const simd::BoxColumns cols(boxes);
    std::vector<double> ious(dt.size() * gt.size());
    for (std::size_t d = 0; d < dt.size(); ++d)
        simd::iou_row(dt[d].box, cols, 0, gt.size(), std::span(ious).subspan(d * gt.size(), gt.size()));
    return ious;
}

// Matches sorted, capped detections against gt sorted by id. Writes
// outcome[t * D + d] and matched[t * D + d] (gt index or -1).
void match_core(std::span<const GtRef> gt, std::span<const DetRef> dt, std::span<const double> ious,
                std::span<const double> thresholds, std::span<Outcome> outcome, std::span<int> matched) {
    const std::size_t G = gt.size(), D = dt.size();
    std::vector<char> taken(G);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const double thr = thresholds[t];
        std::fill(taken.begin(), taken.end(), 0);
        for (std::size_t d = 0; d < D; ++d) {
            const double* row = ious.data() + d * G;
            int best = -1;
            double best_iou = 0.0;
            for (std::size_t g = 0; g < G; ++g) {
                if (gt[g].ignore || taken[g] || row[g] < thr) continue;
                if (best < 0 || row[g] > best_iou) {
                    best = static_cast<int>(g);
                    best_iou = row[g];
                }
            }
            Outcome o = Outcome::false_positive;
            if (best >= 0) {
                taken[static_cast<std::size_t>(best)] = 1;
                o = Outcome::true_positive;
            } else {
                bool absorbed = false;
                for (std::size_t g = 0; g < G && !absorbed; ++g)
                    absorbed = gt[g].ignore && row[g] >= thr;
                if (absorbed || !dt[d].in_stratum) o = Outcome::ignored;
            }
            outcome[t * D + d] = o;
            if (!matched.empty()) matched[t * D + d] = best;
        }
    }
}

// 101-point interpolated AP over an already sorted outcome sequence.
double interpolated_ap(std::span<const Outcome> sorted, std::size_t num_gt) {
    std::vector<double> rc, pr;
    rc.reserve(sorted.size());
    pr.reserve(sorted.size());
    std::size_t tp = 0, fp = 0;
    for (Outcome o : sorted) {
        if (o == Outcome::ignored) continue;
        (o == Outcome::true_positive ? tp : fp) += 1;
        rc.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        pr.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    for (std::size_t i = pr.size(); i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);
    double sum = 0.0;
    for (int k = 0; k < kRecallPoints; ++k) {
        const double r = k / 100.0;
        const auto it = std::lower_bound(rc.begin(), rc.end(), r);
        if (it != rc.end()) sum += pr[static_cast<std::size_t>(it - rc.begin())];
    }
    return sum / kRecallPoints;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// One matching pass definition: which gt count, which detections count.
struct StratumDef {
    std::string name;
    StratumKind kind;
    SlendernessBin bin{};
    AspectGroup group{};
    AreaRange range;
};

struct GtInfo {
    GtRef ref;
    bool crowd = false;
    std::optional<SlendernessBin> bin;
    std::optional<AspectGroup> group;
    double area = 0.0;
};

struct DetInfo {
    DetRef ref;
    std::optional<AspectGroup> group;
    double area = 0.0;
};

bool gt_in(const StratumDef& s, const GtInfo& g) {
    switch (s.kind) {
        case StratumKind::all:
        case StratumKind::category: return true;
        case StratumKind::slenderness: return g.bin == s.bin;
        case StratumKind::aspect: return g.group == s.group;
        case StratumKind::area: return g.area >= s.range.lo && g.area <= s.range.hi;
    }
    return false;
}

bool det_in(const StratumDef& s, const DetInfo& d) {
    switch (s.kind) {
        case StratumKind::aspect: return d.group == s.group;
        case StratumKind::area: return d.area >= s.range.lo && d.area <= s.range.hi;
        default: return true;
    }
}

struct CellInput {
    std::int64_t image_id = 0;
    std::int64_t category_id = 0;
    std::vector<GtInfo> gt;
    std::vector<DetInfo> dt;
};

struct CellResult {
    std::vector<std::int64_t> det_ids;
    std::vector<double> scores;
    std::vector<Outcome> outcomes;  // [stratum][threshold][det]
    std::vector<std::uint32_t> num_gt;  // [stratum]
};

}  // namespace

std::string_view to_string(StratumKind kind) noexcept {
    switch (kind) {
        case StratumKind::all: return "all";
        case StratumKind::slenderness: return "slenderness";
        case StratumKind::aspect: return "aspect";
        case StratumKind::area: return "area";
        case StratumKind::category: return "category";
    }
    return "?";
}

std::optional<StratumKind> parse_stratum_kind(std::string_view text) noexcept {
    for (auto k : {StratumKind::all, StratumKind::slenderness, StratumKind::aspect, StratumKind::area,
                   StratumKind::category})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

std::vector<AreaRange> coco_area_ranges() {
    return {{"small", 0.0, 32.0 * 32.0}, {"medium", 32.0 * 32.0, 96.0 * 96.0}, {"large", 96.0 * 96.0, 1e10}};
}

std::vector<double> iou_range(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw UsageError("IoU range needs lo <= hi and a positive step");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    return out;
}

std::vector<double> parse_iou_range(std::string_view text) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t colon = text.find(':', start);
        const std::string_view piece = text.substr(start, colon == std::string_view::npos ? colon : colon - start);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
        if (ec != std::errc() || ptr != piece.data() + piece.size())
            throw UsageError("bad IoU range '" + std::string(text) + "'");
        parts.push_back(v);
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (parts.size() == 1) return {parts[0]};
    if (parts.size() == 3) return iou_range(parts[0], parts[1], parts[2]);
    throw UsageError("IoU range must be 'value' or 'lo:hi:step'");
}

void EvalConfig::validate() const {
    if (iou_thresholds.empty()) throw UsageError("at least one IoU threshold is required");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
        const double t = iou_thresholds[i];
        if (!(t > 0.0) || !(t <= 1.0)) throw UsageError("IoU thresholds must lie in (0, 1]");
        if (i > 0 && !(t > iou_thresholds[i - 1])) throw UsageError("IoU thresholds must be strictly increasing");
    }
    if (max_dets < 1) throw UsageError("max_dets must be at least 1");
    if (ap_strata.count(StratumKind::slenderness))
        throw UndefinedMetricError(
            "AP cannot be stratified by slenderness: false-positive detections are axis-aligned boxes and "
            "have no slenderness; use AR for slenderness bins");
}

// ---------------------------------------------------------------------------

MatchResult match_detections(std::span<const GtRef> gt_in, std::span<const DetRef> dt_in, const EvalConfig& cfg) {
    std::vector<GtRef> gt(gt_in.begin(), gt_in.end());
    std::sort(gt.begin(), gt.end(), [](const GtRef& a, const GtRef& b) { return a.id < b.id; });
    std::vector<DetRef> dt(dt_in.begin(), dt_in.end());
    std::sort(dt.begin(), dt.end(),
              [](const DetRef& a, const DetRef& b) { return det_before(a.score, a.id, b.score, b.id); });
    if (dt.size() > cfg.max_dets) dt.resize(cfg.max_dets);

    const std::size_t T = cfg.iou_thresholds.size(), D = dt.size();
    const auto ious = iou_matrix(dt, gt);
    std::vector<Outcome> outcome(T * D);
    std::vector<int> matched(T * D);
    match_core(gt, dt, ious, cfg.iou_thresholds, outcome, matched);

    MatchResult res;
    res.thresholds = cfg.iou_thresholds;
    res.per_threshold.resize(T);
    res.unmatched.resize(T);
    for (const auto& g : gt) {
        if (g.ignore)
            res.ignored_gt.push_back(g.id);
        else
            ++res.num_gt;
    }
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<char> hit(gt.size());
        for (std::size_t d = 0; d < D; ++d) {
            DetOutcome o{dt[d].id, dt[d].score, outcome[t * D + d], std::nullopt};
            if (const int m = matched[t * D + d]; m >= 0) {
                o.matched_gt = gt[static_cast<std::size_t>(m)].id;
                hit[static_cast<std::size_t>(m)] = 1;
            }
            res.per_threshold[t].push_back(o);
        }
        for (std::size_t g = 0; g < gt.size(); ++g)
            if (!gt[g].ignore && !hit[g]) res.unmatched[t].push_back(gt[g].id);
    }
    return res;
}

std::optional<double> average_precision(std::span<const DetOutcome> outcomes, std::size_t num_gt) {
    if (num_gt == 0) return std::nullopt;
    std::vector<DetOutcome> sorted(outcomes.begin(), outcomes.end());
    std::sort(sorted.begin(), sorted.end(), [](const DetOutcome& a, const DetOutcome& b) {
        return det_before(a.score, a.detection_id, b.score, b.detection_id);
    });
    std::vector<Outcome> seq;
    seq.reserve(sorted.size());
    for (const auto& o : sorted) seq.push_back(o.outcome);
    return interpolated_ap(seq, num_gt);
}

std::optional<double> average_precision(std::span<const MatchResult> matches, std::size_t t) {
    std::vector<DetOutcome> pooled;
    std::size_t num_gt = 0;
    for (const auto& m : matches) {
        pooled.insert(pooled.end(), m.per_threshold.at(t).begin(), m.per_threshold.at(t).end());
        num_gt += m.num_gt;
    }
    return average_precision(pooled, num_gt);
}

std::optional<double> average_recall(std::span<const MatchResult> matches) {
    if (matches.empty()) return std::nullopt;
    std::size_t num_gt = 0;
    for (const auto& m : matches) num_gt += m.num_gt;
    if (num_gt == 0) return std::nullopt;
    const std::size_t T = matches.front().thresholds.size();
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t tp = 0;
        for (const auto& m : matches)
            for (const auto& o : m.per_threshold.at(t)) tp += o.outcome == Outcome::true_positive;
        sum += static_cast<double>(tp) / static_cast<double>(num_gt);
    }
    return sum / static_cast<double>(T);
}

// ---------------------------------------------------------------------------

const StratumMetrics* EvalReport::find(std::string_view name) const noexcept {
    for (const auto& s : strata)
        if (s.name == name) return &s;
    return nullptr;
}

EvalReport evaluate(const Dataset& ds, const DetectionSet& dt, const EvalConfig& cfg) {
    cfg.validate();
    if (!is_annotated(ds))
        throw UsageError("dataset is not slenderness-annotated; run annotate_slenderness first");

    // Matching passes. Category strata reuse the "all" pass.
    std::vector<StratumDef> defs;
    defs.push_back({"all", StratumKind::all, {}, {}, {}});
    if (cfg.strata.count(StratumKind::slenderness))
        for (auto b : kAllBins)
            defs.push_back({"slenderness/" + std::string(to_string(b)), StratumKind::slenderness, b, {}, {}});
    if (cfg.strata.count(StratumKind::aspect))
        for (auto g : kAllAspectGroups)
            defs.push_back({"aspect/" + std::string(to_string(g)), StratumKind::aspect, {}, g, {}});
    if (cfg.strata.count(StratumKind::area))
        for (const auto& r : cfg.area_ranges) defs.push_back({"area/" + r.name, StratumKind::area, {}, {}, r});

    // Cells keyed by (image, category), in key order.
    std::map<std::pair<std::int64_t, std::int64_t>, CellInput> cell_map;
    std::unordered_map<std::int64_t, std::size_t> category_index;
    for (std::size_t i = 0; i < ds.categories.size(); ++i) category_index.emplace(ds.categories[i].id, i);

    for (const auto& a : ds.annotations) {
        auto& cell = cell_map[{a.image_id, a.category_id}];
        GtInfo g;
        g.ref = GtRef{a.id, a.bbox, a.iscrowd};
        g.crowd = a.iscrowd;
        if (!a.iscrowd) g.bin = a.bin;
        g.group = classify_aspect(a.bbox.aspect_ratio(), cfg.aspect_cuts);
        g.area = a.effective_area();
        cell.gt.push_back(g);
    }
    for (const auto& [image_id, dets] : dt.per_image) {
        for (const auto& d : dets) {
            if (!category_index.count(d.category_id)) continue;
            auto& cell = cell_map[{d.image_id, d.category_id}];
            DetInfo info;
            info.ref = DetRef{d.id, d.bbox, d.score, true};
            if (!d.bbox.degenerate()) info.group = classify_aspect(d.bbox.aspect_ratio(), cfg.aspect_cuts);
            info.area = d.bbox.w * d.bbox.h;
            cell.dt.push_back(info);
        }
    }
    std::vector<CellInput> cells;
    cells.reserve(cell_map.size());
    for (auto& [key, cell] : cell_map) {
        cell.image_id = key.first;
        cell.category_id = key.second;
        std::sort(cell.gt.begin(), cell.gt.end(), [](const GtInfo& a, const GtInfo& b) { return a.ref.id < b.ref.id; });
        std::sort(cell.dt.begin(), cell.dt.end(), [](const DetInfo& a, const DetInfo& b) {
            return det_before(a.ref.score, a.ref.id, b.ref.score, b.ref.id);
        });
        if (cell.dt.size() > cfg.max_dets) cell.dt.resize(cfg.max_dets);
        cells.push_back(std::move(cell));
    }

    const std::size_t S = defs.size(), T = cfg.iou_thresholds.size();
    std::vector<CellResult> results(cells.size());
    parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
        const CellInput& cell = cells[c];
        CellResult& out = results[c];
        const std::size_t D = cell.dt.size();
        std::vector<GtRef> gt(cell.gt.size());
        std::vector<DetRef> det(D);
        for (std::size_t d = 0; d < D; ++d) {
            det[d] = cell.dt[d].ref;
            out.det_ids.push_back(det[d].id);
            out.scores.push_back(det[d].score);
        }
        for (std::size_t g = 0; g < gt.size(); ++g) gt[g] = cell.gt[g].ref;
        const auto ious = iou_matrix(det, gt);
        out.outcomes.resize(S * T * D);
        out.num_gt.resize(S);
        for (std::size_t s = 0; s < S; ++s) {
            std::uint32_t num_gt = 0;
            for (std::size_t g = 0; g < gt.size(); ++g) {
                gt[g].ignore = cell.gt[g].crowd || !gt_in(defs[s], cell.gt[g]);
                num_gt += !gt[g].ignore;
            }
            for (std::size_t d = 0; d < D; ++d) det[d].in_stratum = det_in(defs[s], cell.dt[d]);
            out.num_gt[s] = num_gt;
            match_core(gt, det, ious, cfg.iou_thresholds, std::span(out.outcomes).subspan(s * T * D, T * D), {});
        }
    });

    // Reduction: per category, pool detections across images in score order.
    const std::size_t C = ds.categories.size();
    // value[s][c][t]
    std::vector<std::vector<std::vector<std::optional<double>>>> ap(
        S, std::vector<std::vector<std::optional<double>>>(C, std::vector<std::optional<double>>(T)));
    auto ar = ap;
    std::vector<std::vector<std::size_t>> gt_count(S, std::vector<std::size_t>(C));

    std::vector<std::vector<std::size_t>> cells_of(C);
    for (std::size_t c = 0; c < cells.size(); ++c) cells_of[category_index.at(cells[c].category_id)].push_back(c);

    for (std::size_t k = 0; k < C; ++k) {
        struct Ref {
            std::size_t cell, det;
        };
        std::vector<Ref> order;
        for (std::size_t c : cells_of[k])
            for (std::size_t d = 0; d < results[c].det_ids.size(); ++d) order.push_back({c, d});
        std::sort(order.begin(), order.end(), [&](const Ref& a, const Ref& b) {
            return det_before(results[a.cell].scores[a.det], results[a.cell].det_ids[a.det],
                              results[b.cell].scores[b.det], results[b.cell].det_ids[b.det]);
        });
        std::vector<Outcome> seq(order.size());
        for (std::size_t s = 0; s < S; ++s) {
            std::size_t num_gt = 0;
            for (std::size_t c : cells_of[k]) num_gt += results[c].num_gt[s];
            gt_count[s][k] = num_gt;
            if (num_gt == 0) continue;
            for (std::size_t t = 0; t < T; ++t) {
                std::size_t tp = 0;
                for (std::size_t i = 0; i < order.size(); ++i) {
                    const auto& r = results[order[i].cell];
                    const std::size_t D = r.det_ids.size();
                    seq[i] = r.outcomes[s * T * D + t * D + order[i].det];
                    tp += seq[i] == Outcome::true_positive;
                }
                ap[s][k][t] = interpolated_ap(seq, num_gt);
                ar[s][k][t] = static_cast<double>(tp) / static_cast<double>(num_gt);
            }
        }
    }

    auto summarize = [&](std::string name, StratumKind kind, bool with_ap, std::size_t s,
                         const std::vector<std::size_t>& cats) {
        StratumMetrics m;
        m.name = std::move(name);
        m.kind = kind;
        m.ap_reported = with_ap;
        std::vector<std::optional<double>> all_ap, all_ar;
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<std::optional<double>> ap_t, ar_t;
            for (std::size_t k : cats) {
                ap_t.push_back(ap[s][k][t]);
                ar_t.push_back(ar[s][k][t]);
                all_ap.push_back(ap[s][k][t]);
                all_ar.push_back(ar[s][k][t]);
            }
            if (with_ap) m.ap_per_iou.push_back(mean_of(ap_t));
            m.ar_per_iou.push_back(mean_of(ar_t));
        }
        for (std::size_t k : cats) m.gt_count += gt_count[s][k];
        if (with_ap) m.ap = mean_of(all_ap);
        m.ar = mean_of(all_ar);
        return m;
    };

    std::vector<std::size_t> every(C);
    std::iota(every.begin(), every.end(), std::size_t{0});

    EvalReport report;
    report.iou_thresholds = cfg.iou_thresholds;
    report.max_dets = cfg.max_dets;
    for (std::size_t s = 0; s < S; ++s)
        report.strata.push_back(summarize(defs[s].name, defs[s].kind, cfg.ap_strata.count(defs[s].kind) > 0, s, every));
    if (cfg.strata.count(StratumKind::category))
        for (std::size_t k = 0; k < C; ++k)
            report.strata.push_back(summarize("category/" + ds.categories[k].name, StratumKind::category,
                                              cfg.ap_strata.count(StratumKind::category) > 0, 0, {k}));
    report.map = report.strata.front().ap;
    report.mar = report.strata.front().ar;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json optional_number(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json optional_list(const std::vector<std::optional<double>>& values) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : values) arr.push_back(optional_number(v));
    return arr;
}

}  // namespace

std::string eval_report_json(const EvalReport& r) {
    ordered_json doc;
    doc["iou_thresholds"] = r.iou_thresholds;
    doc["max_dets"] = r.max_dets == kUnlimitedDets ? ordered_json(nullptr) : ordered_json(r.max_dets);
    doc["mAP"] = optional_number(r.map);
    doc["mAR"] = optional_number(r.mar);
    ordered_json strata = ordered_json::object();
    for (const auto& s : r.strata) {
        ordered_json j;
        j["kind"] = std::string(to_string(s.kind));
        j["gt_count"] = s.gt_count;
        if (s.ap_reported) j["AP"] = optional_number(s.ap);
        j["AR"] = optional_number(s.ar);
        if (s.ap_reported) j["AP_per_iou"] = optional_list(s.ap_per_iou);
        j["AR_per_iou"] = optional_list(s.ar_per_iou);
        strata[s.name] = std::move(j);
    }
    doc["strata"] = std::move(strata);
    return doc.dump(2) + "\n";
}

std::string eval_report_csv(const EvalReport& r) {
    std::string out = "stratum,metric,value\n";
    auto row = [&](const std::string& stratum, const std::string& metric, const std::optional<double>& v) {
        out += stratum + "," + metric + "," + (v ? format_number(*v) : std::string()) + "\n";
    };
    row("all", "mAP", r.map);
    row("all", "mAR", r.mar);
    for (const auto& s : r.strata) {
        if (s.ap_reported) row(s.name, "AP", s.ap);
        row(s.name, "AR", s.ar);
        for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
            const std::string suffix = "@" + format_number(r.iou_thresholds[t]);
            if (s.ap_reported) row(s.name, "AP" + suffix, s.ap_per_iou[t]);
            row(s.name, "AR" + suffix, s.ar_per_iou[t]);
        }
    }
    return out;
}

std::string ar_bars_svg(const EvalReport& r) {
    constexpr int width = 360, height = 240, base = 200, bar = 60, gap = 40, left = 50, scale = 160;
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                      "\" height=\"" + std::to_string(height) + "\">\n";
    svg += "<line x1=\"" + std::to_string(left - 10) + "\" y1=\"" + std::to_string(base) + "\" x2=\"" +
           std::to_string(width - 10) + "\" y2=\"" + std::to_string(base) + "\" stroke=\"black\"/>\n";
    int x = left;
    for (auto b : kAllBins) {
        const std::string name = "slenderness/" + std::string(to_string(b));
        const StratumMetrics* m = r.find(name);
        const double v = (m && m->ar) ? *m->ar : 0.0;
        const int h = static_cast<int>(std::lround(v * scale));
        svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(base - h) + "\" width=\"" +
               std::to_string(bar) + "\" height=\"" + std::to_string(h) + "\" fill=\"steelblue\"/>\n";
        svg += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(base + 18) +
               "\" text-anchor=\"middle\">" + std::string(to_string(b)) + "</text>\n";
        char label[32];
        std::snprintf(label, sizeof label, "%.3f", v);
        svg += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(base - h - 6) +
               "\" text-anchor=\"middle\">" + (m && m->ar ? std::string(label) : std::string("n/a")) + "</text>\n";
        x += bar + gap;
    }
    svg += "<text x=\"10\" y=\"20\">AR by slenderness bin</text>\n</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, bool class_agnostic) {
    if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0)) throw UsageError("NMS IoU threshold must lie in (0, 1)");
    auto before = [](const Detection& a, const Detection& b) { return det_before(a.score, a.id, b.score, b.id); };

    std::map<std::int64_t, std::vector<Detection>> partitions;
    for (const auto& d : dets) partitions[class_agnostic ? 0 : d.category_id].push_back(d);

    std::vector<Detection> kept;
    std::vector<double> row;
    for (auto& [_, part] : partitions) {
        std::sort(part.begin(), part.end(), before);
        std::vector<AABox> boxes;
        boxes.reserve(part.size());
        for (const auto& d : part) boxes.push_back(d.bbox);
        const simd::BoxColumns cols(boxes);
        std::vector<char> suppressed(part.size());
        row.resize(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) {
            if (suppressed[i]) continue;
            kept.push_back(part[i]);
            const std::size_t rest = part.size() - i - 1;
            simd::iou_row(part[i].bbox, cols, i + 1, part.size(), std::span(row).first(rest));
            for (std::size_t j = 0; j < rest; ++j)
                if (row[j] > iou_threshold) suppressed[i + 1 + j] = 1;
        }
    }
    std::sort(kept.begin(), kept.end(), before);
    return kept;
}

}  // namespace slender

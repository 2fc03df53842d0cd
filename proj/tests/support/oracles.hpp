#pragma once

// Brute-force reference implementations used only by tests. None of these
// call into the library's matching, AP or hull code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "slender/cocoio.hpp"
#include "slender/geometry.hpp"

namespace oracle {

using slender::AABox;
using slender::Point;

inline double box_iou(const AABox& a, const AABox& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Smallest bounding-rectangle area over a uniform rotation grid in [0, 90).
inline double rotation_sweep_min_area(const std::vector<Point>& pts, double step_deg = 0.01) {
    double best = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::lround(90.0 / step_deg));
    for (int i = 0; i < steps; ++i) {
        const double th = i * step_deg * std::numbers::pi / 180.0;
        const double c = std::cos(th), s = std::sin(th);
        double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
        for (const auto& p : pts) {
            const double u = p.x * c + p.y * s, v = -p.x * s + p.y * c;
            u0 = std::min(u0, u);
            u1 = std::max(u1, u);
            v0 = std::min(v0, v);
            v1 = std::max(v1, v);
        }
        best = std::min(best, (u1 - u0) * (v1 - v0));
    }
    return best;
}

/// Slenderness from the best rectangle of a fine rotation grid.
inline double rotation_sweep_slenderness(const std::vector<Point>& pts, double step_deg = 0.01) {
    double best = std::numeric_limits<double>::infinity(), s_best = 0.0;
    const int steps = static_cast<int>(std::lround(90.0 / step_deg));
    for (int i = 0; i < steps; ++i) {
        const double th = i * step_deg * std::numbers::pi / 180.0;
        const double c = std::cos(th), s = std::sin(th);
        double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
        for (const auto& p : pts) {
            const double u = p.x * c + p.y * s, v = -p.x * s + p.y * c;
            u0 = std::min(u0, u);
            u1 = std::max(u1, u);
            v0 = std::min(v0, v);
            v1 = std::max(v1, v);
        }
        if ((u1 - u0) * (v1 - v0) < best) {
            best = (u1 - u0) * (v1 - v0);
            s_best = std::min(u1 - u0, v1 - v0) / std::max(u1 - u0, v1 - v0);
        }
    }
    return s_best;
}

/// Random convex polygon: sorted random angles on a jittered ellipse,
/// then rotated and shifted.
inline std::vector<Point> random_convex_polygon(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> radius(5.0, 100.0);
    std::uniform_real_distribution<double> shift(-200.0, 200.0);
    const double rx = radius(rng), ry = radius(rng) * 0.3, rot = angle(rng), cx = shift(rng), cy = shift(rng);
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (auto& a : angles) a = angle(rng);
    std::sort(angles.begin(), angles.end());
    std::vector<Point> pts;
    for (double a : angles) {
        const double x = rx * std::cos(a), y = ry * std::sin(a);
        pts.push_back({cx + x * std::cos(rot) - y * std::sin(rot), cy + x * std::sin(rot) + y * std::cos(rot)});
    }
    return pts;
}

// ---------------------------------------------------------------------------
// NMS

/// Quadratic reference: walk detections by (score desc, id asc) and keep one
/// when it overlaps no kept detection of its partition by more than thr.
inline std::vector<std::int64_t> nms_reference(std::vector<slender::Detection> dets, double thr, bool agnostic) {
    std::sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    std::vector<slender::Detection> kept;
    for (const auto& d : dets) {
        bool ok = true;
        for (const auto& k : kept)
            if ((agnostic || k.category_id == d.category_id) && box_iou(k.bbox, d.bbox) > thr) ok = false;
        if (ok) kept.push_back(d);
    }
    std::vector<std::int64_t> ids;
    for (const auto& k : kept) ids.push_back(k.id);
    return ids;
}

// ---------------------------------------------------------------------------
// Evaluation

struct BruteResult {
    std::optional<double> map;
    std::optional<double> mar;
    /// AR with gt restricted by the predicate (others ignored).
    std::optional<double> stratum_ar;
};

/// Exhaustive evaluator over the "all" stratum plus one optional gt-only
/// stratum for AR. Matching per (image, category, threshold) is a plain
/// greedy loop; AP takes, for each of 101 recall levels, the best precision
/// over every score cutoff reaching that recall.
inline BruteResult brute_evaluate(const slender::Dataset& ds, const slender::DetectionSet& dt,
                                  const std::vector<double>& thresholds, std::size_t max_dets,
                                  const std::function<bool(const slender::Annotation&)>& in_stratum = {}) {
    struct Out {
        double score;
        std::int64_t id;
        int kind;  // 0 fp, 1 tp, 2 ignored
    };
    auto run = [&](bool stratified, bool want_ap) {
        std::vector<double> ap_vals, ar_vals;
        for (const auto& cat : ds.categories) {
            std::size_t npig = 0;
            for (const auto& a : ds.annotations)
                if (a.category_id == cat.id && !a.iscrowd && (!stratified || in_stratum(a))) ++npig;
            if (npig == 0) continue;
            for (double thr : thresholds) {
                std::vector<Out> pooled;
                for (const auto& img : ds.images) {
                    std::vector<const slender::Annotation*> gts;
                    for (const auto& a : ds.annotations)
                        if (a.image_id == img.id && a.category_id == cat.id) gts.push_back(&a);
                    std::sort(gts.begin(), gts.end(), [](auto* x, auto* y) { return x->id < y->id; });
                    std::vector<slender::Detection> dets;
                    if (auto it = dt.per_image.find(img.id); it != dt.per_image.end())
                        for (const auto& d : it->second)
                            if (d.category_id == cat.id) dets.push_back(d);
                    std::sort(dets.begin(), dets.end(), [](const auto& x, const auto& y) {
                        if (x.score != y.score) return x.score > y.score;
                        return x.id < y.id;
                    });
                    if (dets.size() > max_dets) dets.resize(max_dets);
                    std::vector<bool> used(gts.size(), false);
                    for (const auto& d : dets) {
                        int best = -1;
                        double best_iou = -1.0;
                        bool hits_ignore = false;
                        for (std::size_t g = 0; g < gts.size(); ++g) {
                            const bool ignore = gts[g]->iscrowd || (stratified && !in_stratum(*gts[g]));
                            const double v = box_iou(d.bbox, gts[g]->bbox);
                            if (v < thr) continue;
                            if (ignore) {
                                hits_ignore = true;
                                continue;
                            }
                            if (used[g]) continue;
                            if (v > best_iou) {
                                best_iou = v;
                                best = static_cast<int>(g);
                            }
                        }
                        if (best >= 0) {
                            used[static_cast<std::size_t>(best)] = true;
                            pooled.push_back({d.score, d.id, 1});
                        } else {
                            pooled.push_back({d.score, d.id, hits_ignore ? 2 : 0});
                        }
                    }
                }
                std::sort(pooled.begin(), pooled.end(), [](const Out& x, const Out& y) {
                    if (x.score != y.score) return x.score > y.score;
                    return x.id < y.id;
                });
                std::vector<double> recall_at, precision_at;
                std::size_t tp = 0, fp = 0;
                for (const auto& o : pooled) {
                    if (o.kind == 2) continue;
                    (o.kind == 1 ? tp : fp) += 1;
                    recall_at.push_back(static_cast<double>(tp) / static_cast<double>(npig));
                    precision_at.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
                }
                ar_vals.push_back(static_cast<double>(tp) / static_cast<double>(npig));
                if (want_ap) {
                    double sum = 0.0;
                    for (int k = 0; k <= 100; ++k) {
                        const double r = k / 100.0;
                        double best = 0.0;
                        for (std::size_t i = 0; i < recall_at.size(); ++i)
                            if (recall_at[i] >= r) best = std::max(best, precision_at[i]);
                        sum += best;
                    }
                    ap_vals.push_back(sum / 101.0);
                }
            }
        }
        auto mean = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        return std::pair{mean(ap_vals), mean(ar_vals)};
    };

    BruteResult res;
    const auto [ap, ar] = run(false, true);
    res.map = ap;
    res.mar = ar;
    if (in_stratum) res.stratum_ar = run(true, false).second;
    return res;
}

/// Random toy instance: up to 5 images, 3 categories, 10 detections per
/// image, integer-aligned boxes so ties and exact thresholds occur.
struct ToyInstance {
    slender::Dataset ds;
    slender::DetectionSet dt;
};

inline ToyInstance random_toy_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_images(1, 5), n_cats(1, 3), n_gt(0, 6), n_dt(0, 10);
    std::uniform_int_distribution<int> coord(0, 60), size(1, 30), jitter(-3, 3), pct(0, 99), score(1, 9);
    ToyInstance t;
    const int cats = n_cats(rng);
    for (int c = 1; c <= cats; ++c) t.ds.categories.push_back({c, "cat" + std::to_string(c)});
    std::uniform_int_distribution<int> pick_cat(1, cats);
    const int images = n_images(rng);
    std::int64_t ann_id = 1, det_id = 0;
    for (int i = 1; i <= images; ++i) {
        t.ds.images.push_back({i, 100, 100, "img" + std::to_string(i) + ".png", slender::ImageSource::base});
        std::vector<slender::Annotation> here;
        for (int g = n_gt(rng); g > 0; --g) {
            slender::Annotation a;
            a.id = ann_id++;
            a.image_id = i;
            a.category_id = pick_cat(rng);
            a.bbox = {double(coord(rng)), double(coord(rng)), double(size(rng)), double(size(rng))};
            a.area = a.bbox.w * a.bbox.h;
            a.iscrowd = pct(rng) < 10;
            here.push_back(a);
        }
        for (int d = n_dt(rng); d > 0; --d) {
            slender::Detection det;
            det.id = det_id++;
            det.image_id = i;
            if (!here.empty() && pct(rng) < 70) {
                const auto& g = here[static_cast<std::size_t>(pct(rng)) % here.size()];
                det.category_id = pct(rng) < 85 ? g.category_id : pick_cat(rng);
                det.bbox = {g.bbox.x + jitter(rng), g.bbox.y + jitter(rng), std::max(1.0, g.bbox.w + jitter(rng)),
                            std::max(1.0, g.bbox.h + jitter(rng))};
            } else {
                det.category_id = pick_cat(rng);
                det.bbox = {double(coord(rng)), double(coord(rng)), double(size(rng)), double(size(rng))};
            }
            det.score = score(rng) / 10.0;
            t.dt.per_image[i].push_back(det);
        }
        for (auto& a : here) t.ds.annotations.push_back(std::move(a));
    }
    return t;
}

}  // namespace oracle

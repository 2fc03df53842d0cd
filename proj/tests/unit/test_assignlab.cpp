#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "slender/assignlab.hpp"

using namespace slender;

namespace {

AnchorGridConfig one_level(int stride) {
    AnchorGridConfig cfg;
    cfg.strides = {stride};
    cfg.scales = {1.0};
    cfg.ratios = {1.0};
    return cfg;
}

std::size_t total_positives(const Assignment& a) {
    std::size_t n = 0;
    for (const auto& l : a.labels) n += l.kind == LabelKind::positive;
    return n;
}

// Anchor boxes enumerated directly from the configuration, independent of
// build_anchors.
double best_anchor_iou(const AABox& gt, const AnchorGridConfig& cfg, int w, int h) {
    double best = 0;
    for (int stride : cfg.strides)
        for (int row = 0; row * stride < h; ++row)
            for (int col = 0; col * stride < w; ++col)
                for (double scale : cfg.scales)
                    for (double ratio : cfg.ratios) {
                        const double side = cfg.base_size_factor * stride * scale;
                        const double aw = side / std::sqrt(ratio), ah = side * std::sqrt(ratio);
                        const double cx = stride / 2.0 + col * stride, cy = stride / 2.0 + row * stride;
                        best = std::max(best, oracle::box_iou(gt, {cx - aw / 2, cy - ah / 2, aw, ah}));
                    }
    return best;
}

const StrategyBinStats& row(const AssignmentReport& r, Strategy s, std::string_view bin) {
    const auto* found = r.find(s, bin);
    if (!found) throw std::runtime_error("missing row");
    return *found;
}

const std::vector<Strategy> kAll{Strategy::iou, Strategy::inbox, Strategy::nearest_center};

}  // namespace

TEST(Anchors, GridCount) {
    EXPECT_EQ(build_anchors(one_level(8), 32, 32).size(), 16u);
    std::size_t expect = 0;
    for (int s : {8, 16, 32, 64, 128}) {
        const std::size_t c = static_cast<std::size_t>((800 + s - 1) / s);
        expect += c * c * 9;
    }
    EXPECT_EQ(build_anchors(AnchorGridConfig{}, 800, 800).size(), expect);
}

TEST(Anchors, RatioAndArea) {
    auto cfg = one_level(8);
    cfg.ratios = {2.0};
    const auto a = build_anchors(cfg, 8, 8);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_NEAR(a[0].box.w, 32 * std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(a[0].box.h, 32 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(a[0].box.w * a[0].box.h, 1024, 1e-9);
    EXPECT_EQ(a[0].box.center_x(), 4.0);
}

TEST(Anchors, ConfigValidation) {
    AnchorGridConfig cfg;
    cfg.strides = {8, 0};
    EXPECT_THROW(cfg.validate(), UsageError);
    cfg = {};
    cfg.ratios = {-1};
    EXPECT_THROW(cfg.validate(), UsageError);
    IouAssignOptions o;
    o.neg_thr = 0.6;
    EXPECT_THROW(o.validate(), UsageError);
}

TEST(AssignIou, IdenticalAnchorPositive) {
    const auto anchors = build_anchors(AnchorGridConfig{}, 256, 256);
    const GtBox g{1, anchors[40].box};
    const auto a = assign_iou(anchors, std::span(&g, 1));
    EXPECT_EQ(a.labels[40].kind, LabelKind::positive);
    EXPECT_EQ(a.labels[40].gt_id, 1);
    EXPECT_GE(a.positive_count(1), 1u);
}

TEST(AssignIou, SquareAtBaseScaleHasPositive) {
    const AnchorGridConfig cfg;
    const auto anchors = build_anchors(cfg, 256, 256);
    // 64x64 centered on a stride-16 cell center.
    const GtBox g{1, {104 - 32, 104 - 32, 64, 64}};
    EXPECT_GE(assign_iou(anchors, std::span(&g, 1)).positive_count(1), 1u);
}

TEST(AssignIou, BarHasNoPositives) {
    const AnchorGridConfig cfg;
    const auto anchors = build_anchors(cfg, 320, 320);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> p(20, 200);
    for (int trial = 0; trial < 10; ++trial) {
        const GtBox g{1, {double(p(rng)), double(p(rng)), 100, 4}};
        EXPECT_LT(best_anchor_iou(g.box, cfg, 320, 320), 0.2);
        EXPECT_EQ(assign_iou(anchors, std::span(&g, 1)).positive_count(1), 0u);
        IouAssignOptions force;
        force.force_match = true;
        EXPECT_EQ(assign_iou(anchors, std::span(&g, 1), force).positive_count(1), 1u);
    }
}

TEST(AssignIou, ThresholdBands) {
    const auto anchors = build_anchors(one_level(8), 8, 8);  // one 32x32 anchor at (4,4)
    const AABox a = anchors[0].box;
    const GtBox pos{1, a};
    const GtBox mid{1, {a.x, a.y, a.w * 0.45, a.h}};   // IoU 0.45
    const GtBox neg{1, {a.x, a.y, a.w * 0.2, a.h}};    // IoU 0.2
    EXPECT_EQ(assign_iou(anchors, std::span(&pos, 1)).labels[0].kind, LabelKind::positive);
    EXPECT_EQ(assign_iou(anchors, std::span(&mid, 1)).labels[0].kind, LabelKind::ignore);
    EXPECT_EQ(assign_iou(anchors, std::span(&neg, 1)).labels[0].kind, LabelKind::negative);
}

TEST(AssignIou, TieGoesToLowerGtId) {
    const auto anchors = build_anchors(one_level(8), 8, 8);
    const std::vector<GtBox> g{{9, anchors[0].box}, {2, anchors[0].box}};
    EXPECT_EQ(assign_iou(anchors, g).labels[0].gt_id, 2);
}

TEST(AssignIou, PositivesNonIncreasingInThreshold) {
    const auto anchors = build_anchors(AnchorGridConfig{}, 256, 256);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> p(0, 200), e(8, 120);
    std::vector<GtBox> gts;
    for (int i = 0; i < 12; ++i) gts.push_back({i, {p(rng), p(rng), e(rng), e(rng)}});
    std::size_t prev = SIZE_MAX;
    for (double thr = 0.3; thr < 0.95; thr += 0.05) {
        IouAssignOptions o;
        o.pos_thr = thr;
        o.neg_thr = 0.3;
        const std::size_t n = total_positives(assign_iou(anchors, gts, o));
        EXPECT_LE(n, prev);
        prev = n;
    }
}

TEST(AssignInbox, GridEnumeration) {
    const LocationGrid grid(std::vector<int>{8}, 128, 128);
    const GtBox wide{1, {0, 0, 100, 10}};
    const auto a = assign_inbox(grid, std::span(&wide, 1));
    EXPECT_EQ(a.positive_count(1), 12u);
    for (auto id : a.positives.at(1)) EXPECT_EQ(grid.location(id).y, 4.0);

    const GtBox thin{2, {0, 0, 100, 4}};
    EXPECT_EQ(assign_inbox(grid, std::span(&thin, 1)).positive_count(2), 0u);
    EXPECT_EQ(assign_inbox(grid, std::span(&thin, 1), true).positive_count(2), 13u);
}

TEST(AssignInbox, NestedGoesToSmaller) {
    const LocationGrid grid(std::vector<int>{8}, 64, 64);
    const std::vector<GtBox> g{{1, {0, 0, 64, 64}}, {2, {16, 16, 16, 16}}};
    const auto a = assign_inbox(grid, g);
    EXPECT_EQ(a.labels[grid.id(0, 2, 2)].gt_id, 2);
    EXPECT_EQ(a.labels[grid.id(0, 0, 0)].gt_id, 1);
    EXPECT_EQ(a.positive_count(2), 4u);
}

TEST(AssignNearestCenter, CenteredGt) {
    const LocationGrid grid(AnchorGridConfig{}.strides, 256, 256);
    // 64x64 box centered on stride-16 cell (3, 5).
    const GtBox g{1, {8 + 3 * 16 - 32, 8 + 5 * 16 - 32, 64, 64}};
    const auto a = assign_nearest_center(grid, std::span(&g, 1));
    ASSERT_EQ(a.positive_count(1), 1u);
    EXPECT_EQ(a.positives.at(1)[0], grid.id(1, 3, 5));
}

TEST(AssignNearestCenter, OnePositivePerGtWhatEverTheShape) {
    const LocationGrid grid(AnchorGridConfig{}.strides, 512, 512);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> p(0, 400), e(1, 100);
    for (int trial = 0; trial < 100; ++trial) {
        const GtBox g{1, {p(rng), p(rng), e(rng), e(rng) * 0.1}};
        EXPECT_EQ(assign_nearest_center(grid, std::span(&g, 1)).positive_count(1), 1u);
    }
}

TEST(AssignNearestCenter, CollisionDisplacesLarger) {
    const LocationGrid grid(std::vector<int>{8}, 64, 64);
    const std::vector<GtBox> g{{1, {10, 10, 12, 12}}, {2, {12, 12, 8, 8}}};
    const auto a = assign_nearest_center(grid, g);
    EXPECT_EQ(a.positive_count(2), 1u);
    EXPECT_EQ(a.positive_count(1), 0u);
    EXPECT_EQ(a.displaced, std::vector<std::int64_t>{1});
}

TEST(AssignNearestCenter, TiesGoToLowerIndex) {
    const LocationGrid grid(std::vector<int>{8}, 64, 64);
    // Center (8, 8) is equidistant from cells 0 and 1 on both axes.
    const GtBox g{1, {4, 4, 8, 8}};
    const auto a = assign_nearest_center(grid, std::span(&g, 1), 1.0);
    EXPECT_EQ(a.positives.at(1)[0], grid.id(0, 0, 0));
}

TEST(SelectLevel, ClosestBaseSize) {
    const LocationGrid grid(AnchorGridConfig{}.strides, 64, 64);
    EXPECT_EQ(select_level(grid, 32.0 * 32.0, 4.0), 0u);
    EXPECT_EQ(select_level(grid, 64.0 * 64.0, 4.0), 1u);
    EXPECT_EQ(select_level(grid, 1e6, 4.0), 4u);
    EXPECT_EQ(select_level(grid, 1.0, 4.0), 0u);
    // sqrt(32 * 64) is equidistant in log space: finer level wins.
    EXPECT_EQ(select_level(grid, 32.0 * 64.0, 4.0), 0u);
}

TEST(Assignments, ScaleInvariant) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> p(0, 200), e(2, 120);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<GtBox> small, big;
        for (int i = 0; i < 8; ++i) {
            const AABox b{p(rng), p(rng), e(rng), e(rng)};
            small.push_back({i, b});
            big.push_back({i, {b.x * 2, b.y * 2, b.w * 2, b.h * 2}});
        }
        AnchorGridConfig c1, c2;
        for (auto& s : c2.strides) s *= 2;
        const auto a1 = build_anchors(c1, 256, 256), a2 = build_anchors(c2, 512, 512);
        const LocationGrid g1(c1.strides, 256, 256), g2(c2.strides, 512, 512);
        EXPECT_EQ(assign_iou(a1, small).positives, assign_iou(a2, big).positives);
        EXPECT_EQ(assign_inbox(g1, small).positives, assign_inbox(g2, big).positives);
        const auto n1 = assign_nearest_center(g1, small), n2 = assign_nearest_center(g2, big);
        EXPECT_EQ(n1.positives, n2.positives);
        EXPECT_EQ(n1.displaced, n2.displaced);
    }
}

TEST(Centerness, Examples) {
    EXPECT_EQ(centerness({5, 5, 5, 5}), 1.0);
    EXPECT_EQ(centerness({0, 4, 2, 2}), 0.0);
    EXPECT_DOUBLE_EQ(centerness({1, 4, 2, 2}), 0.5);
    EXPECT_THROW(centerness({0, 0, 0, 0}), GeometryError);
    EXPECT_THROW(centerness({0, 0, 1, 1}), GeometryError);
    EXPECT_THROW(centerness({-1, 3, 1, 1}), GeometryError);
}

TEST(SlenderCenterness, Examples) {
    const BorderDistances d{1, 4, 2, 2};  // product 0.25
    EXPECT_DOUBLE_EQ(slender_centerness(d, Slenderness(0.5)), 0.5);
    EXPECT_NEAR(slender_centerness(d, Slenderness(0.2)), std::pow(0.25, 0.2), 1e-15);
    EXPECT_NEAR(slender_centerness(d, Slenderness(0.2)), 0.7579, 1e-4);
    for (double s : {0.05, 0.3, 1.0}) EXPECT_EQ(slender_centerness({3, 3, 7, 7}, Slenderness(s)), 1.0);
    EXPECT_THROW(slender_centerness({0, 0, 1, 1}, Slenderness(0.3)), GeometryError);
}

TEST(Centerness, Properties) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 50.0), s(0.01, 1.0);
    for (int i = 0; i < 5000; ++i) {
        const BorderDistances d{u(rng), u(rng) + 1e-3, u(rng), u(rng) + 1e-3};
        const double c = centerness(d);
        const double s1 = s(rng), s2 = s(rng);
        const double c1 = slender_centerness(d, Slenderness(s1)), c2 = slender_centerness(d, Slenderness(s2));
        ASSERT_TRUE(c >= 0.0 && c <= 1.0);
        ASSERT_TRUE(c1 >= 0.0 && c1 <= 1.0);
        ASSERT_NEAR(slender_centerness(d, Slenderness(0.5)), c, 1e-12);
        if (s1 < s2) { ASSERT_GE(c1, c2); }
        if (s1 < 0.5) { ASSERT_GE(c1, c - 1e-15); }
    }
}

TEST(BorderDistancesTest, Signs) {
    const auto d = border_distances({0, 0, 10, 4}, {2, 1});
    EXPECT_EQ(d.l, 2.0);
    EXPECT_EQ(d.r, 8.0);
    EXPECT_EQ(d.t, 1.0);
    EXPECT_EQ(d.b, 3.0);
    EXPECT_LT(border_distances({0, 0, 10, 4}, {12, 1}).r, 0.0);
}

TEST(Strategy, Names) {
    for (auto s : kAll) EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_EQ(parse_strategy("center"), Strategy::nearest_center);
    EXPECT_FALSE(parse_strategy("atss").has_value());
}

TEST(Synthetic, ParseItems) {
    const auto bars = parse_scene_item("bars:100x4:50");
    EXPECT_EQ(bars.kind, SceneItem::Kind::bars);
    EXPECT_EQ(bars.w, 100);
    EXPECT_EQ(bars.h, 4);
    EXPECT_EQ(bars.count, 50u);
    EXPECT_EQ(parse_scene_item("squares:64:20").w, 64);
    EXPECT_EQ(parse_scene_item("slender:10:0.05:0.2").s_max, 0.2);
    for (const char* bad : {"bars:100:4", "squares:x:1", "slender:5:0.3:0.1", "blob:1", "bars:0x4:1", ""})
        EXPECT_THROW(parse_scene_item(bad), UsageError) << bad;
}

TEST(Synthetic, SeededAndWellFormed) {
    const std::vector<SceneItem> items{parse_scene_item("bars:100x4:30"), parse_scene_item("slender:30:0.05:0.5")};
    const auto a = synthetic_scenes(items, 7), b = synthetic_scenes(items, 7), c = synthetic_scenes(items, 8);
    EXPECT_EQ(write_ground_truth(a), write_ground_truth(b));
    EXPECT_NE(write_ground_truth(a), write_ground_truth(c));
    EXPECT_EQ(a.annotations.size(), 60u);
    for (const auto& ann : a.annotations) {
        const auto* img = a.find_image(ann.image_id);
        ASSERT_NE(img, nullptr);
        EXPECT_GE(ann.bbox.x, 0.0);
        EXPECT_GE(ann.bbox.y, 0.0);
        EXPECT_LE(ann.bbox.x2(), img->width);
        EXPECT_LE(ann.bbox.y2(), img->height);
    }
    const auto annotated = annotate_slenderness(a);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(annotated.annotations[i].s->value(), 0.04, 1e-12);
    for (std::size_t i = 30; i < 60; ++i) {
        const double s = annotated.annotations[i].s->value();
        EXPECT_GE(s, 0.05 - 0.02);
        EXPECT_LE(s, 0.5 + 0.02);
    }
}

TEST(Diagnose, SquaresAlwaysCovered) {
    const auto ds = annotate_slenderness(synthetic_scenes(std::vector{parse_scene_item("squares:64:20")}, 1));
    const auto r = diagnose(ds, kAll);
    for (auto s : kAll) {
        EXPECT_EQ(row(r, s, "R").count, 20u);
        EXPECT_EQ(row(r, s, "R").zero_positive_fraction, 0.0) << to_string(s);
    }
}

TEST(Diagnose, BarsMissedByIouNotByNearestCenter) {
    const auto ds = annotate_slenderness(synthetic_scenes(std::vector{parse_scene_item("bars:100x4:50")}, 7));
    const auto r = diagnose(ds, kAll);
    EXPECT_EQ(row(r, Strategy::iou, "XS").zero_positive_fraction, 1.0);
    EXPECT_EQ(row(r, Strategy::nearest_center, "XS").zero_positive_fraction, 0.0);
    EXPECT_EQ(row(r, Strategy::nearest_center, "XS").mean_positives, 1.0);
    EXPECT_EQ(row(r, Strategy::iou, "XS").count, 50u);
}

TEST(Diagnose, MixedSetXsWorseThanRegular) {
    const auto ds = annotate_slenderness(synthetic_scenes(
        std::vector{parse_scene_item("slender:60:0.05:0.15"), parse_scene_item("slender:60:0.5:1.0")}, 3));
    const auto r = diagnose(ds, kAll);
    EXPECT_GT(row(r, Strategy::iou, "XS").zero_positive_fraction, row(r, Strategy::iou, "R").zero_positive_fraction);
    EXPECT_LT(row(r, Strategy::iou, "XS").mean_positives, row(r, Strategy::iou, "R").mean_positives);
}

TEST(Diagnose, ReportShapeAndDeterminism) {
    const auto ds = annotate_slenderness(synthetic_scenes(
        std::vector{parse_scene_item("bars:100x4:20"), parse_scene_item("squares:64:20")}, 5));
    DiagnoseOptions o1, o4;
    o1.threads = 1;
    o4.threads = 4;
    const auto r1 = diagnose(ds, kAll, o1), r4 = diagnose(ds, kAll, o4);
    EXPECT_EQ(assignment_report_json(r1), assignment_report_json(r4));
    EXPECT_EQ(assignment_report_csv(r1), assignment_report_csv(r4));
    ASSERT_EQ(r1.rows.size(), 12u);
    EXPECT_EQ(r1.rows.front().bin, "XS");
    EXPECT_EQ(r1.rows.back().bin, "all");
    EXPECT_EQ(row(r1, Strategy::iou, "all").count, 40u);
    const auto csv = assignment_report_csv(r1);
    EXPECT_EQ(csv.rfind("strategy,bin,mean_positives,zero_positive_fraction,count\n", 0), 0u);
    std::size_t hist = 0;
    for (auto n : row(r1, Strategy::inbox, "all").histogram) hist += n;
    EXPECT_EQ(hist, 40u);
}

TEST(Diagnose, RequiresAnnotatedDataset) {
    const auto ds = synthetic_scenes(std::vector{parse_scene_item("squares:64:2")}, 1);
    EXPECT_THROW(diagnose(ds, kAll), UsageError);
}

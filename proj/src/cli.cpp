#include "slender/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "slender/assignlab.hpp"
#include "slender/cocoio.hpp"
#include "slender/error.hpp"
#include "slender/evalcore.hpp"
#include "slender/textio.hpp"

namespace slender::cli {
namespace {

struct Common {
    unsigned threads = 0;
    std::uint64_t seed = 0;
};

struct Sink {
    std::ostream& out;
    std::ostream& err;

    // Writes `content` to `path`, or to `out` when no path was given.
    // Returns the stream the summary line belongs on.
    std::ostream& emit(const std::string& path, const std::string& content) {
        if (path.empty()) {
            out << content;
            return err;
        }
        write_file_atomic(path, content);
        return out;
    }
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) parts.push_back(item);
    return parts;
}

std::string fixed4(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

void print_warnings(const Diagnostics& diag, std::ostream& err) {
    constexpr std::size_t kShown = 5;
    for (std::size_t i = 0; i < diag.warnings.size() && i < kShown; ++i) err << "warning: " << diag.warnings[i] << "\n";
    if (diag.warnings.size() > kShown) err << "warning: " << diag.warnings.size() - kShown << " more warnings\n";
}

Dataset load_annotated(const std::string& path, const Common& common, std::ostream& err) {
    Diagnostics diag;
    Dataset ds = load_ground_truth_file(path, &diag);
    print_warnings(diag, err);
    return annotate_slenderness(ds, common.threads);
}

std::string distribution_svg(const DistributionReport& rep) {
    constexpr int base = 200, bar = 60, gap = 40, left = 50, scale = 160;
    const auto pct = rep.non_crowd.percent();
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" height=\"240\">\n";
    svg += "<line x1=\"40\" y1=\"200\" x2=\"350\" y2=\"200\" stroke=\"black\"/>\n";
    int x = left;
    for (auto b : kAllBins) {
        const auto i = static_cast<std::size_t>(b);
        const int h = static_cast<int>(std::lround(pct[i] / 100.0 * scale));
        char label[48];
        std::snprintf(label, sizeof label, "%zu (%.1f%%)", rep.non_crowd.counts[i], pct[i]);
        svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(base - h) + "\" width=\"" +
               std::to_string(bar) + "\" height=\"" + std::to_string(h) + "\" fill=\"darkorange\"/>\n";
        svg += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"218\" text-anchor=\"middle\">" +
               std::string(to_string(b)) + "</text>\n";
        svg += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" + std::to_string(base - h - 6) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + label + "</text>\n";
        x += bar + gap;
    }
    svg += "<text x=\"10\" y=\"20\">Instances by slenderness bin</text>\n</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string gt, dt, out, csv, svg;
    std::string iou = "0.5:0.95:0.05";
    std::size_t max_dets = 100;
    std::string bins = "slenderness,aspect,area,category";
    std::string ap_bins = "all,aspect,area,category";
};

int run_eval(const EvalArgs& a, const Common& common, Sink sink) {
    EvalConfig cfg;
    cfg.iou_thresholds = parse_iou_range(a.iou);
    cfg.max_dets = a.max_dets == 0 ? kUnlimitedDets : a.max_dets;
    cfg.threads = common.threads;
    cfg.strata.clear();
    for (const auto& b : split_list(a.bins)) {
        const auto kind = parse_stratum_kind(b);
        if (!kind) throw UsageError("unknown --bins entry '" + b + "'");
        cfg.strata.insert(*kind);
    }
    cfg.ap_strata.clear();
    for (const auto& b : split_list(a.ap_bins)) {
        const auto kind = parse_stratum_kind(b);
        if (!kind) throw UsageError("unknown --ap-bins entry '" + b + "'");
        cfg.ap_strata.insert(*kind);
    }
    cfg.validate();

    const Dataset ds = load_annotated(a.gt, common, sink.err);
    Diagnostics diag;
    const DetectionSet dt = load_detections_file(a.dt, ds, &diag);
    print_warnings(diag, sink.err);
    const EvalReport report = evaluate(ds, dt, cfg);

    std::ostream& summary = sink.emit(a.out, eval_report_json(report));
    if (!a.csv.empty()) write_file_atomic(a.csv, eval_report_csv(report));
    if (!a.svg.empty()) write_file_atomic(a.svg, ar_bars_svg(report));
    summary << "eval: " << ds.images.size() << " images, " << dt.size() << " detections, mAP=" << fixed4(report.map)
            << " mAR=" << fixed4(report.mar) << "\n";
    return kOk;
}

struct SlendernessArgs {
    std::string gt, out, annotated_out, svg;
};

int run_slenderness(const SlendernessArgs& a, const Common& common, Sink sink) {
    const Dataset ds = load_annotated(a.gt, common, sink.err);
    std::ostream& summary = sink.emit(a.out, slenderness_csv(ds));
    if (!a.annotated_out.empty()) write_file_atomic(a.annotated_out, write_ground_truth(ds));
    const DistributionReport rep = distribution_report(ds);
    if (!a.svg.empty()) write_file_atomic(a.svg, distribution_svg(rep));
    summary << "slenderness: " << rep.non_crowd.total() << " annotated (XS " << rep.non_crowd.counts[0] << ", S "
            << rep.non_crowd.counts[1] << ", R " << rep.non_crowd.counts[2] << "), " << rep.from_bbox
            << " from boxes, " << rep.skipped << " skipped\n";
    return kOk;
}

struct MixArgs {
    std::string base, extra, out;
    std::string filter_bin = "XS";
    std::int64_t id_offset = 0;
};

int run_mix(const MixArgs& a, const Common& common, Sink sink) {
    MixConfig cfg;
    const auto bin = parse_bin(a.filter_bin);
    if (!bin) throw UsageError("--filter-bin must be XS, S or R");
    cfg.filter_bin = *bin;
    if (a.id_offset > 0) cfg.id_offset = a.id_offset;
    const Dataset base = load_annotated(a.base, common, sink.err);
    const Dataset extra = load_annotated(a.extra, common, sink.err);
    const Dataset mixed = mix_datasets(base, extra, cfg);
    std::ostream& summary = sink.emit(a.out, write_ground_truth(mixed));
    summary << "mix: " << base.images.size() << " base + " << mixed.images.size() - base.images.size()
            << " extra images, " << mixed.annotations.size() << " annotations\n";
    return kOk;
}

struct WeightsArgs {
    std::string gt, out;
    std::string rates = "1,1,1";
    std::string aggregate = "max";
};

int run_weights(const WeightsArgs& a, const Common& common, Sink sink) {
    const auto parts = split_list(a.rates);
    if (parts.size() != 3) throw UsageError("--rates takes XS,S,R");
    SampleRates rates;
    try {
        rates = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    } catch (const std::exception&) {
        throw UsageError("--rates takes three numbers");
    }
    rates.validate();
    WeightAggregation agg;
    if (a.aggregate == "max")
        agg = WeightAggregation::image_max;
    else if (a.aggregate == "mean")
        agg = WeightAggregation::image_mean;
    else
        throw UsageError("--aggregate must be max or mean");
    const Dataset ds = load_annotated(a.gt, common, sink.err);
    const auto weights = sampling_weights(ds, rates, agg);
    std::ostream& summary = sink.emit(a.out, weights_csv(weights));
    std::size_t boosted = 0;
    for (const auto& [_, w] : weights) boosted += w > 1.0;
    summary << "weights: " << weights.size() << " images, " << boosted << " above 1\n";
    return kOk;
}

struct AssignArgs {
    std::vector<std::string> strategies;
    std::string gt, out, csv;
    std::vector<std::string> synthetic;
    double pos_thr = 0.5, neg_thr = 0.4;
    bool force_match = false, inclusive = false;
    std::vector<int> strides;
    double base_size = 4.0;
};

int run_assign(const AssignArgs& a, const Common& common, Sink sink) {
    std::vector<Strategy> strategies;
    for (const auto& s : a.strategies) {
        if (s == "all") {
            strategies.insert(strategies.end(), {Strategy::iou, Strategy::inbox, Strategy::nearest_center});
            continue;
        }
        const auto parsed = parse_strategy(s);
        if (!parsed) throw UsageError("unknown strategy '" + s + "'");
        strategies.push_back(*parsed);
    }
    if (strategies.empty()) strategies = {Strategy::iou, Strategy::inbox, Strategy::nearest_center};
    if (a.gt.empty() == a.synthetic.empty()) throw UsageError("assign needs exactly one of --gt or --synthetic");

    DiagnoseOptions opts;
    opts.threads = common.threads;
    opts.iou = {a.pos_thr, a.neg_thr, a.force_match};
    opts.inbox_inclusive = a.inclusive;
    if (!a.strides.empty()) opts.grid.strides = a.strides;
    opts.grid.base_size_factor = a.base_size;

    Dataset ds;
    std::optional<std::uint64_t> seed;
    if (!a.synthetic.empty()) {
        std::vector<SceneItem> items;
        for (const auto& s : a.synthetic) items.push_back(parse_scene_item(s));
        ds = annotate_slenderness(synthetic_scenes(items, common.seed), common.threads);
        seed = common.seed;
    } else {
        ds = load_annotated(a.gt, common, sink.err);
    }
    AssignmentReport report = diagnose(ds, strategies, opts);
    report.seed = seed;

    std::ostream& summary = sink.emit(a.out, assignment_report_json(report));
    if (!a.csv.empty()) write_file_atomic(a.csv, assignment_report_csv(report));
    summary << "assign:";
    for (const auto& r : report.rows)
        if (r.bin == "all")
            summary << " " << to_string(r.strategy) << " zero-positive " << fixed4(r.zero_positive_fraction);
    summary << " over " << (report.rows.empty() ? 0 : report.find(report.rows.front().strategy, "all")->count)
            << " objects\n";
    return kOk;
}

struct NmsArgs {
    std::string dt, gt, out;
    double iou_thr = 0.5;
    bool class_agnostic = false;
};

int run_nms(const NmsArgs& a, const Common&, Sink sink) {
    Diagnostics diag;
    std::ifstream in(a.dt, std::ios::binary);
    if (!in) throw UsageError("cannot open " + a.dt);
    const DetectionSet dt = parse_detections(in, &diag);
    print_warnings(diag, sink.err);
    if (!a.gt.empty()) validate_detections(dt, load_ground_truth_file(a.gt));
    std::vector<Detection> kept;
    for (const auto& [_, dets] : dt.per_image) {
        auto survivors = nms(dets, a.iou_thr, a.class_agnostic);
        kept.insert(kept.end(), survivors.begin(), survivors.end());
    }
    std::sort(kept.begin(), kept.end(), [](const Detection& x, const Detection& y) { return x.id < y.id; });
    std::ostream& summary = sink.emit(a.out, write_detections(kept));
    summary << "nms: kept " << kept.size() << " of " << dt.size() << " detections ("
            << (a.class_agnostic ? "class-agnostic" : "class-wise") << ")\n";
    return kOk;
}

struct ReportArgs {
    std::string gt, out, csv, svg;
};

int run_report(const ReportArgs& a, const Common& common, Sink sink) {
    const Dataset ds = load_annotated(a.gt, common, sink.err);
    const DistributionReport rep = distribution_report(ds);
    std::ostream& summary = sink.emit(a.out, distribution_json(rep));
    if (!a.csv.empty()) write_file_atomic(a.csv, distribution_csv(rep));
    if (!a.svg.empty()) write_file_atomic(a.svg, distribution_svg(rep));
    const auto pct = rep.non_crowd.percent();
    char buf[128];
    std::snprintf(buf, sizeof buf, "XS %.1f%%, S %.1f%%, R %.1f%%", pct[0], pct[1], pct[2]);
    summary << "report: " << rep.images << " images, " << rep.non_crowd.total() << " instances, " << buf << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Slenderness-aware detection evaluation and diagnosis", "slenderkit"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--threads", common.threads, "Worker threads (0 = SLENDER_THREADS or all cores)");
        sub->add_option("--seed", common.seed, "Seed for synthetic data");
    };

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "COCO-style mAP/mAR with slenderness-stratified AR");
    eval->add_option("--gt", ev.gt, "Ground-truth annotation file")->required()->check(CLI::ExistingFile);
    eval->add_option("--dt", ev.dt, "Detection results file")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", ev.out, "Report JSON (stdout when omitted)");
    eval->add_option("--csv", ev.csv, "Flat stratum,metric,value CSV");
    eval->add_option("--svg", ev.svg, "Bar chart of AR per slenderness bin");
    eval->add_option("--iou", ev.iou, "IoU thresholds as lo:hi:step or a single value");
    eval->add_option("--max-dets", ev.max_dets, "Detections kept per image and category (0 = unlimited)");
    eval->add_option("--bins", ev.bins, "Strata: slenderness,aspect,area,category");
    eval->add_option("--ap-bins", ev.ap_bins, "Strata that also report AP");
    add_common(eval);

    SlendernessArgs sl;
    auto* slend = app.add_subcommand("slenderness", "Per-annotation slenderness sidecar CSV");
    slend->add_option("--gt", sl.gt, "Ground-truth annotation file")->required()->check(CLI::ExistingFile);
    slend->add_option("--out", sl.out, "CSV output (stdout when omitted)");
    slend->add_option("--annotated-out", sl.annotated_out, "Annotation file with slenderness fields added");
    slend->add_option("--svg", sl.svg, "Histogram of slenderness bins");
    add_common(slend);

    MixArgs mx;
    auto* mix = app.add_subcommand("mix", "Add extra images holding slender objects to a base set");
    mix->add_option("--base", mx.base, "Base annotation file")->required()->check(CLI::ExistingFile);
    mix->add_option("--extra", mx.extra, "Extra annotation file")->required()->check(CLI::ExistingFile);
    mix->add_option("--out", mx.out, "Mixed annotation file (stdout when omitted)");
    mix->add_option("--filter-bin", mx.filter_bin, "Qualifying bin and below: XS, S or R");
    mix->add_option("--id-offset", mx.id_offset, "Offset for extra ids (default: next power of ten)");
    add_common(mix);

    WeightsArgs wt;
    auto* weights = app.add_subcommand("weights", "Per-image oversampling weights from bin rates");
    weights->add_option("--gt", wt.gt, "Annotation file")->required()->check(CLI::ExistingFile);
    weights->add_option("--rates", wt.rates, "Rates for XS,S,R (each >= 1)");
    weights->add_option("--aggregate", wt.aggregate, "Per-image rule: max or mean");
    weights->add_option("--out", wt.out, "CSV output (stdout when omitted)");
    add_common(weights);

    AssignArgs as;
    auto* assign = app.add_subcommand("assign", "Simulate label assignment and tabulate positives per bin");
    assign->add_option("--strategy", as.strategies, "iou, inbox, nearest_center (alias center) or all")
        ->take_all();
    assign->add_option("--gt", as.gt, "Annotation file")->check(CLI::ExistingFile);
    assign->add_option("--synthetic", as.synthetic, "Scene terms: bars:WxH:N, squares:S:N, slender:N:SMIN:SMAX");
    assign->add_option("--out", as.out, "Report JSON (stdout when omitted)");
    assign->add_option("--csv", as.csv, "strategy,bin,... CSV");
    assign->add_option("--pos-thr", as.pos_thr, "IoU positive threshold");
    assign->add_option("--neg-thr", as.neg_thr, "IoU negative threshold");
    assign->add_flag("--force-match", as.force_match, "Force each gt's best anchor positive");
    assign->add_flag("--inclusive", as.inclusive, "Count box borders as inside for inbox");
    assign->add_option("--strides", as.strides, "Pyramid strides")->delimiter(',');
    assign->add_option("--base-size", as.base_size, "Anchor base size as a multiple of the stride");
    add_common(assign);

    NmsArgs nm;
    auto* nmscmd = app.add_subcommand("nms", "Greedy non-maximum suppression on a results file");
    nmscmd->add_option("--dt", nm.dt, "Detection results file")->required()->check(CLI::ExistingFile);
    nmscmd->add_option("--gt", nm.gt, "Optional annotation file to validate ids against")->check(CLI::ExistingFile);
    nmscmd->add_option("--out", nm.out, "Surviving detections (stdout when omitted)");
    nmscmd->add_option("--iou-thr", nm.iou_thr, "Suppress when IoU exceeds this");
    nmscmd->add_flag("--class-agnostic", nm.class_agnostic, "Suppress across categories");
    add_common(nmscmd);

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Slenderness distribution of a dataset");
    report->add_option("--gt", rp.gt, "Annotation file")->required()->check(CLI::ExistingFile);
    report->add_option("--out", rp.out, "Distribution JSON (stdout when omitted)");
    report->add_option("--csv", rp.csv, "population,bin,count,percent CSV");
    report->add_option("--svg", rp.svg, "Histogram of slenderness bins");
    add_common(report);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    Sink sink{out, err};
    try {
        if (*eval) return run_eval(ev, common, sink);
        if (*slend) return run_slenderness(sl, common, sink);
        if (*mix) return run_mix(mx, common, sink);
        if (*weights) return run_weights(wt, common, sink);
        if (*assign) return run_assign(as, common, sink);
        if (*nmscmd) return run_nms(nm, common, sink);
        if (*report) return run_report(rp, common, sink);
        err << "no subcommand\n";
        return kUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UndefinedMetricError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << " (byte " << e.byte_offset() << ")\n";
        return kInputIntegrity;
    } catch (const IntegrityError& e) {
        err << "error: " << e.what() << "\n";
        return kInputIntegrity;
    } catch (const GeometryError& e) {
        err << "error: " << e.what() << "\n";
        return kInputIntegrity;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

}  // namespace slender::cli

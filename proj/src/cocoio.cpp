#include "slender/cocoio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "slender/error.hpp"
#include "slender/parallel.hpp"
#include "slender/textio.hpp"

namespace slender {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kMaxListedOffenders = 20;

json parse_document(std::istream& in) {
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), e.byte);
    }
}

[[noreturn]] void structure_error(const std::string& where, const std::string& expected) {
    throw ParseError(where + ": expected " + expected, 0);
}

const json& field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) structure_error(where, std::string("field '") + key + "'");
    return *it;
}

std::int64_t as_id(const json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    structure_error(where, "an integer id");
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) structure_error(where, "a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) structure_error(where, "a finite number");
    return d;
}

AABox as_box(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 4) structure_error(where, "[x, y, w, h]");
    return AABox{as_number(v[0], where), as_number(v[1], where), as_number(v[2], where), as_number(v[3], where)};
}

std::vector<std::vector<Point>> as_polygons(const json& v, const std::string& where) {
    std::vector<std::vector<Point>> parts;
    for (std::size_t p = 0; p < v.size(); ++p) {
        const json& flat = v[p];
        if (!flat.is_array() || flat.size() % 2 != 0)
            structure_error(where + "[" + std::to_string(p) + "]", "an even-length coordinate list");
        std::vector<Point> pts;
        pts.reserve(flat.size() / 2);
        for (std::size_t i = 0; i < flat.size(); i += 2)
            pts.push_back({as_number(flat[i], where), as_number(flat[i + 1], where)});
        if (!pts.empty()) parts.push_back(std::move(pts));
    }
    return parts;
}

std::string join_offenders(const std::vector<std::string>& offenders) {
    std::string msg;
    for (std::size_t i = 0; i < offenders.size() && i < kMaxListedOffenders; ++i) {
        if (i) msg += "; ";
        msg += offenders[i];
    }
    if (offenders.size() > kMaxListedOffenders)
        msg += "; and " + std::to_string(offenders.size() - kMaxListedOffenders) + " more";
    return msg;
}

void warn(Diagnostics* diag, std::string msg) {
    if (diag) diag->warnings.push_back(std::move(msg));
}

std::optional<SlendernessSource> parse_source(std::string_view text) {
    for (auto s : {SlendernessSource::polygon, SlendernessSource::bbox, SlendernessSource::skipped})
        if (to_string(s) == text) return s;
    return std::nullopt;
}

void check_integrity(const Dataset& ds) {
    std::vector<std::string> offenders;
    std::unordered_set<std::int64_t> image_ids, category_ids, annotation_ids;
    std::unordered_set<std::string> names;
    for (const auto& img : ds.images) {
        if (!image_ids.insert(img.id).second) offenders.push_back("duplicate image id " + std::to_string(img.id));
        if (img.width <= 0 || img.height <= 0)
            offenders.push_back("image " + std::to_string(img.id) + " has non-positive size");
    }
    for (const auto& cat : ds.categories) {
        if (!category_ids.insert(cat.id).second)
            offenders.push_back("duplicate category id " + std::to_string(cat.id));
        if (!names.insert(cat.name).second) offenders.push_back("duplicate category name '" + cat.name + "'");
    }
    for (const auto& ann : ds.annotations) {
        const std::string who = "annotation " + std::to_string(ann.id);
        if (!annotation_ids.insert(ann.id).second) offenders.push_back("duplicate " + who);
        if (!image_ids.count(ann.image_id))
            offenders.push_back(who + " references unknown image_id " + std::to_string(ann.image_id));
        if (!category_ids.count(ann.category_id))
            offenders.push_back(who + " references unknown category_id " + std::to_string(ann.category_id));
    }
    if (!offenders.empty()) throw IntegrityError("integrity check failed: " + join_offenders(offenders));
}

std::optional<Slenderness> measure(const Annotation& ann, SlendernessSource& source) {
    std::size_t n = 0;
    for (const auto& part : ann.segmentation) n += part.size();
    if (n > 0) {
        std::vector<Point> pts;
        pts.reserve(n);
        for (const auto& part : ann.segmentation) pts.insert(pts.end(), part.begin(), part.end());
        try {
            const Slenderness s = slenderness(min_area_rect(pts));
            source = SlendernessSource::polygon;
            return s;
        } catch (const GeometryError&) {
            source = SlendernessSource::skipped;
            return std::nullopt;
        }
    }
    source = SlendernessSource::bbox;
    return slenderness(ann.bbox);
}

}  // namespace

std::string_view to_string(SlendernessSource source) noexcept {
    switch (source) {
        case SlendernessSource::none: return "none";
        case SlendernessSource::polygon: return "polygon";
        case SlendernessSource::bbox: return "bbox";
        case SlendernessSource::skipped: return "skipped";
    }
    return "?";
}

const Category* Dataset::find_category(std::int64_t id) const noexcept {
    for (const auto& c : categories)
        if (c.id == id) return &c;
    return nullptr;
}

const ImageRecord* Dataset::find_image(std::int64_t id) const noexcept {
    for (const auto& i : images)
        if (i.id == id) return &i;
    return nullptr;
}

std::size_t DetectionSet::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, v] : per_image) n += v.size();
    return n;
}

std::vector<Detection> DetectionSet::flatten() const {
    std::vector<Detection> all;
    all.reserve(size());
    for (const auto& [_, v] : per_image) all.insert(all.end(), v.begin(), v.end());
    std::sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) { return a.id < b.id; });
    return all;
}

// ---------------------------------------------------------------------------

Dataset load_ground_truth(std::istream& in, Diagnostics* diag) {
    const json doc = parse_document(in);
    if (!doc.is_object()) structure_error("document", "an object");

    Dataset ds;
    const json& images = field(doc, "images", "document");
    if (!images.is_array()) structure_error("images", "an array");
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string where = "images[" + std::to_string(i) + "]";
        const json& j = images[i];
        if (!j.is_object()) structure_error(where, "an object");
        ImageRecord rec;
        rec.id = as_id(field(j, "id", where), where + ".id");
        rec.width = static_cast<int>(as_id(field(j, "width", where), where + ".width"));
        rec.height = static_cast<int>(as_id(field(j, "height", where), where + ".height"));
        if (auto it = j.find("file_name"); it != j.end() && it->is_string()) rec.file_name = it->get<std::string>();
        if (auto it = j.find("source"); it != j.end() && it->is_string() && it->get<std::string>() == "extra")
            rec.source = ImageSource::extra;
        ds.images.push_back(std::move(rec));
    }

    const json& cats = field(doc, "categories", "document");
    if (!cats.is_array()) structure_error("categories", "an array");
    for (std::size_t i = 0; i < cats.size(); ++i) {
        const std::string where = "categories[" + std::to_string(i) + "]";
        const json& j = cats[i];
        if (!j.is_object()) structure_error(where, "an object");
        const json& name = field(j, "name", where);
        if (!name.is_string()) structure_error(where + ".name", "a string");
        ds.categories.push_back({as_id(field(j, "id", where), where + ".id"), name.get<std::string>()});
    }

    std::unordered_map<std::int64_t, const ImageRecord*> image_index;
    for (const auto& img : ds.images) image_index.emplace(img.id, &img);

    const json& anns = field(doc, "annotations", "document");
    if (!anns.is_array()) structure_error("annotations", "an array");
    ds.annotations.reserve(anns.size());
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const std::string where = "annotations[" + std::to_string(i) + "]";
        const json& j = anns[i];
        if (!j.is_object()) structure_error(where, "an object");
        Annotation ann;
        ann.id = as_id(field(j, "id", where), where + ".id");
        ann.image_id = as_id(field(j, "image_id", where), where + ".image_id");
        ann.category_id = as_id(field(j, "category_id", where), where + ".category_id");
        ann.bbox = as_box(field(j, "bbox", where), where + ".bbox");
        if (auto it = j.find("area"); it != j.end() && !it->is_null()) ann.area = as_number(*it, where + ".area");
        if (auto it = j.find("iscrowd"); it != j.end() && !it->is_null())
            ann.iscrowd = it->is_boolean() ? it->get<bool>() : as_number(*it, where + ".iscrowd") != 0.0;
        if (auto it = j.find("segmentation"); it != j.end()) {
            if (it->is_array()) {
                ann.segmentation = as_polygons(*it, where + ".segmentation");
            } else if (!ann.iscrowd && !it->is_null()) {
                warn(diag, "annotation " + std::to_string(ann.id) +
                               ": run-length segmentation ignored; slenderness will use the box");
            }
        }
        if (auto it = j.find("slenderness"); it != j.end() && !it->is_null()) {
            ann.s = Slenderness(as_number(*it, where + ".slenderness"));
            ann.bin = classify_slenderness(*ann.s);
            if (auto b = j.find("slenderness_bin"); b != j.end() && b->is_string() &&
                                                      parse_bin(b->get<std::string>()) != ann.bin)
                throw IntegrityError("annotation " + std::to_string(ann.id) +
                                     ": slenderness_bin disagrees with slenderness");
        }
        if (auto it = j.find("slenderness_source"); it != j.end() && it->is_string()) {
            const auto src = parse_source(it->get<std::string>());
            if (!src) structure_error(where + ".slenderness_source", "polygon, bbox or skipped");
            if ((*src == SlendernessSource::skipped) == ann.s.has_value())
                throw IntegrityError("annotation " + std::to_string(ann.id) +
                                     ": slenderness_source disagrees with slenderness");
            ann.s_source = *src;
        } else if (ann.s) {
            throw IntegrityError("annotation " + std::to_string(ann.id) + ": slenderness without slenderness_source");
        }

        if (ann.bbox.degenerate()) {
            warn(diag, "annotation " + std::to_string(ann.id) + ": box without extent dropped");
            continue;
        }
        if (auto img = image_index.find(ann.image_id); img != image_index.end()) {
            const auto& r = *img->second;
            if (ann.bbox.x < 0.0 || ann.bbox.y < 0.0 || ann.bbox.x2() > r.width || ann.bbox.y2() > r.height)
                warn(diag, "annotation " + std::to_string(ann.id) + ": box exceeds image bounds");
        }
        ds.annotations.push_back(std::move(ann));
    }

    check_integrity(ds);
    return ds;
}

Dataset load_ground_truth_file(const std::string& path, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    return load_ground_truth(in, diag);
}

DetectionSet parse_detections(std::istream& in, Diagnostics* diag) {
    const json doc = parse_document(in);
    if (!doc.is_array()) structure_error("results", "an array");
    DetectionSet out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "results[" + std::to_string(i) + "]";
        const json& j = doc[i];
        if (!j.is_object()) structure_error(where, "an object");
        Detection d;
        d.id = static_cast<std::int64_t>(i);
        d.image_id = as_id(field(j, "image_id", where), where + ".image_id");
        d.category_id = as_id(field(j, "category_id", where), where + ".category_id");
        d.bbox = as_box(field(j, "bbox", where), where + ".bbox");
        d.score = as_number(field(j, "score", where), where + ".score");
        if (d.score < 0.0 || d.score > 1.0) warn(diag, where + ": score outside [0, 1]");
        if (d.bbox.w < 0.0 || d.bbox.h < 0.0)
            throw IntegrityError(where + ": detection box has negative extent");
        out.per_image[d.image_id].push_back(d);
    }
    return out;
}

void validate_detections(const DetectionSet& dt, const Dataset& ds) {
    std::unordered_set<std::int64_t> images, cats;
    for (const auto& i : ds.images) images.insert(i.id);
    for (const auto& c : ds.categories) cats.insert(c.id);
    std::vector<std::string> offenders;
    for (const auto& d : dt.flatten()) {
        if (!images.count(d.image_id))
            offenders.push_back("detection " + std::to_string(d.id) + " references unknown image_id " +
                                std::to_string(d.image_id));
        if (!cats.count(d.category_id))
            offenders.push_back("detection " + std::to_string(d.id) + " references unknown category_id " +
                                std::to_string(d.category_id));
    }
    if (!offenders.empty()) throw IntegrityError("integrity check failed: " + join_offenders(offenders));
}

DetectionSet load_detections(std::istream& in, const Dataset& ds, Diagnostics* diag) {
    DetectionSet dt = parse_detections(in, diag);
    validate_detections(dt, ds);
    return dt;
}

DetectionSet load_detections_file(const std::string& path, const Dataset& ds, Diagnostics* diag) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    return load_detections(in, ds, diag);
}

std::string write_ground_truth(const Dataset& ds) {
    ordered_json doc;
    ordered_json images = ordered_json::array();
    for (const auto& img : ds.images) {
        ordered_json j;
        j["id"] = img.id;
        j["width"] = img.width;
        j["height"] = img.height;
        j["file_name"] = img.file_name;
        j["source"] = img.source == ImageSource::extra ? "extra" : "base";
        images.push_back(std::move(j));
    }
    ordered_json anns = ordered_json::array();
    for (const auto& a : ds.annotations) {
        ordered_json j;
        j["id"] = a.id;
        j["image_id"] = a.image_id;
        j["category_id"] = a.category_id;
        j["bbox"] = {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h};
        ordered_json seg = ordered_json::array();
        for (const auto& part : a.segmentation) {
            ordered_json flat = ordered_json::array();
            for (const auto& p : part) {
                flat.push_back(p.x);
                flat.push_back(p.y);
            }
            seg.push_back(std::move(flat));
        }
        j["segmentation"] = std::move(seg);
        j["area"] = a.area;
        j["iscrowd"] = a.iscrowd ? 1 : 0;
        if (a.s_source != SlendernessSource::none) {
            if (a.s) {
                j["slenderness"] = a.s->value();
                j["slenderness_bin"] = std::string(to_string(*a.bin));
            }
            j["slenderness_source"] = std::string(to_string(a.s_source));
        }
        anns.push_back(std::move(j));
    }
    ordered_json cats = ordered_json::array();
    for (const auto& c : ds.categories) cats.push_back({{"id", c.id}, {"name", c.name}});
    doc["images"] = std::move(images);
    doc["annotations"] = std::move(anns);
    doc["categories"] = std::move(cats);
    return doc.dump() + "\n";
}

std::string write_detections(const std::vector<Detection>& detections) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : detections) {
        ordered_json j;
        j["image_id"] = d.image_id;
        j["category_id"] = d.category_id;
        j["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
        j["score"] = d.score;
        arr.push_back(std::move(j));
    }
    return arr.dump() + "\n";
}

// ---------------------------------------------------------------------------

Dataset annotate_slenderness(const Dataset& ds, unsigned threads) {
    Dataset out = ds;
    std::sort(out.annotations.begin(), out.annotations.end(),
              [](const Annotation& a, const Annotation& b) { return a.id < b.id; });
    parallel_for(out.annotations.size(), threads, [&](std::size_t i) {
        Annotation& ann = out.annotations[i];
        if (ann.iscrowd) {
            ann.s.reset();
            ann.bin.reset();
            ann.s_source = SlendernessSource::none;
            return;
        }
        SlendernessSource source = SlendernessSource::none;
        ann.s = measure(ann, source);
        ann.bin = ann.s ? std::optional(classify_slenderness(*ann.s)) : std::nullopt;
        ann.s_source = source;
    });
    return out;
}

bool is_annotated(const Dataset& ds) noexcept {
    return std::all_of(ds.annotations.begin(), ds.annotations.end(), [](const Annotation& a) {
        return a.iscrowd || a.s_source != SlendernessSource::none;
    });
}

std::string slenderness_csv(const Dataset& ds) {
    std::string out = "annotation_id,s,bin,source\n";
    for (const auto& a : ds.annotations) {
        if (a.iscrowd) continue;
        out += std::to_string(a.id);
        out += ',';
        if (a.s) out += format_number(a.s->value());
        out += ',';
        if (a.bin) out += to_string(*a.bin);
        out += ',';
        out += to_string(a.s_source);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

Dataset mix_datasets(const Dataset& base, const Dataset& extra, const MixConfig& cfg) {
    if (!is_annotated(base) || !is_annotated(extra))
        throw UsageError("mix_datasets needs slenderness-annotated datasets; run annotate_slenderness first");

    std::int64_t max_base = 0;
    for (const auto& i : base.images) max_base = std::max(max_base, i.id);
    for (const auto& a : base.annotations) max_base = std::max(max_base, a.id);
    std::int64_t offset = 0;
    if (cfg.id_offset) {
        offset = *cfg.id_offset;
        if (offset <= max_base)
            throw IntegrityError("id offset " + std::to_string(offset) + " does not exceed the largest base id " +
                                 std::to_string(max_base));
    } else {
        offset = 1;
        while (offset <= max_base) offset *= 10;
    }

    std::unordered_map<std::string, std::int64_t> base_by_name;
    for (const auto& c : base.categories) base_by_name.emplace(c.name, c.id);
    std::unordered_map<std::int64_t, std::int64_t> category_map;
    for (const auto& c : extra.categories)
        if (auto it = base_by_name.find(c.name); it != base_by_name.end()) category_map.emplace(c.id, it->second);

    std::set<std::int64_t> qualifying;
    for (const auto& a : extra.annotations) {
        if (a.iscrowd || !a.bin || !category_map.count(a.category_id)) continue;
        if (static_cast<int>(*a.bin) <= static_cast<int>(cfg.filter_bin)) qualifying.insert(a.image_id);
    }

    Dataset out = base;
    std::unordered_set<std::int64_t> image_ids, annotation_ids;
    for (const auto& i : base.images) image_ids.insert(i.id);
    for (const auto& a : base.annotations) annotation_ids.insert(a.id);

    for (const auto& img : extra.images) {
        if (!qualifying.count(img.id)) continue;
        ImageRecord rec = img;
        rec.id = img.id + offset;
        rec.source = ImageSource::extra;
        if (!image_ids.insert(rec.id).second)
            throw IntegrityError("image id collision after offset: " + std::to_string(rec.id));
        out.images.push_back(std::move(rec));
    }
    for (const auto& a : extra.annotations) {
        if (!qualifying.count(a.image_id)) continue;
        auto cat = category_map.find(a.category_id);
        if (cat == category_map.end()) continue;
        Annotation ann = a;
        ann.id = a.id + offset;
        ann.image_id = a.image_id + offset;
        ann.category_id = cat->second;
        if (!annotation_ids.insert(ann.id).second)
            throw IntegrityError("annotation id collision after offset: " + std::to_string(ann.id));
        out.annotations.push_back(std::move(ann));
    }
    check_integrity(out);
    return out;
}

// ---------------------------------------------------------------------------

double SampleRates::rate(SlendernessBin bin) const noexcept {
    switch (bin) {
        case SlendernessBin::XS: return xs;
        case SlendernessBin::S: return s;
        case SlendernessBin::R: return r;
    }
    return 1.0;
}

void SampleRates::validate() const {
    for (double v : {xs, s, r})
        if (!std::isfinite(v) || v < 1.0) throw UsageError("sampling rates must be finite and >= 1");
}

std::map<std::int64_t, double> sampling_weights(const Dataset& ds, const SampleRates& rates,
                                                WeightAggregation aggregation) {
    rates.validate();
    struct Acc {
        double max = 1.0;
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::int64_t, Acc> acc;
    for (const auto& img : ds.images) acc[img.id];
    for (const auto& a : ds.annotations) {
        if (a.iscrowd || !a.bin) continue;
        Acc& x = acc[a.image_id];
        const double r = rates.rate(*a.bin);
        x.max = std::max(x.max, r);
        x.sum += r;
        ++x.n;
    }
    std::map<std::int64_t, double> weights;
    for (const auto& [id, x] : acc) {
        if (x.n == 0)
            weights[id] = 1.0;
        else
            weights[id] = aggregation == WeightAggregation::image_max ? x.max : x.sum / static_cast<double>(x.n);
    }
    return weights;
}

std::string weights_csv(const std::map<std::int64_t, double>& weights) {
    std::string out = "image_id,weight\n";
    for (const auto& [id, w] : weights) out += std::to_string(id) + "," + format_number(w) + "\n";
    return out;
}

// ---------------------------------------------------------------------------

std::array<double, 3> BinHistogram::percent() const noexcept {
    std::array<double, 3> p{};
    const std::size_t t = total();
    if (t == 0) return p;
    for (std::size_t i = 0; i < 3; ++i) p[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(t);
    return p;
}

DistributionReport distribution_report(const Dataset& ds) {
    DistributionReport rep;
    rep.images = ds.images.size();
    for (const auto& a : ds.annotations) {
        if (a.iscrowd) {
            ++rep.crowd;
            SlendernessSource ignored;
            if (auto s = measure(a, ignored)) ++rep.with_crowd.counts[static_cast<int>(classify_slenderness(*s))];
            continue;
        }
        switch (a.s_source) {
            case SlendernessSource::polygon: ++rep.from_polygon; break;
            case SlendernessSource::bbox: ++rep.from_bbox; break;
            case SlendernessSource::skipped: ++rep.skipped; break;
            case SlendernessSource::none: break;
        }
        if (!a.bin) continue;
        ++rep.non_crowd.counts[static_cast<int>(*a.bin)];
        ++rep.with_crowd.counts[static_cast<int>(*a.bin)];
    }
    return rep;
}

namespace {

ordered_json histogram_json(const BinHistogram& h) {
    ordered_json j;
    const auto pct = h.percent();
    for (auto b : kAllBins) {
        const auto i = static_cast<std::size_t>(b);
        j[std::string(to_string(b))] = {{"count", h.counts[i]}, {"percent", pct[i]}};
    }
    j["total"] = h.total();
    return j;
}

}  // namespace

std::string distribution_json(const DistributionReport& r) {
    ordered_json doc;
    doc["images"] = r.images;
    doc["non_crowd"] = histogram_json(r.non_crowd);
    doc["with_crowd"] = histogram_json(r.with_crowd);
    doc["crowd"] = r.crowd;
    doc["skipped"] = r.skipped;
    doc["from_polygon"] = r.from_polygon;
    doc["from_bbox"] = r.from_bbox;
    return doc.dump(2) + "\n";
}

std::string distribution_csv(const DistributionReport& r) {
    std::string out = "population,bin,count,percent\n";
    auto rows = [&](const char* name, const BinHistogram& h) {
        const auto pct = h.percent();
        for (auto b : kAllBins) {
            const auto i = static_cast<std::size_t>(b);
            out += std::string(name) + "," + std::string(to_string(b)) + "," + std::to_string(h.counts[i]) + "," +
                   format_number(pct[i]) + "\n";
        }
    };
    rows("non_crowd", r.non_crowd);
    rows("with_crowd", r.with_crowd);
    return out;
}

}  // namespace slender

#include "vrd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace vrd {
namespace {

// Canonical ordering: score descending, then full record ascending, so
// equal-scored predictions always rank the same way regardless of input
// order.
std::tuple<double, double, double, double> box_key(const Box& b) {
    return {b.x_min, b.y_min, b.x_max, b.y_max};
}

bool rel_before(const TripletPrediction& a, const TripletPrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tuple(a.image_id, a.subject_label, box_key(a.subject_box), a.object_label,
                      box_key(a.object_box), a.predicate) <
           std::tuple(b.image_id, b.subject_label, box_key(b.subject_box), b.object_label,
                      box_key(b.object_box), b.predicate);
}

bool attr_before(const AttributePrediction& a, const AttributePrediction& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tuple(a.image_id, a.object_label, box_key(a.object_box), a.attribute) <
           std::tuple(b.image_id, b.object_label, box_key(b.object_box), b.attribute);
}

bool rel_matches(const TripletPrediction& p, const GtRelationship& g,
                 const MatchCriterion& criterion) {
    if (p.subject_label != g.subject_label || p.object_label != g.object_label ||
        p.predicate != g.predicate) {
        return false;
    }
    if (criterion.mode == MatchMode::Relationship) {
        return iou(p.subject_box, g.subject_box) >= criterion.iou_threshold &&
               iou(p.object_box, g.object_box) >= criterion.iou_threshold;
    }
    return iou(union_box(p.subject_box, p.object_box), union_box(g.subject_box, g.object_box)) >=
           criterion.iou_threshold;
}

bool attr_matches(const AttributePrediction& p, const GtAttribute& g, double iou_threshold) {
    return p.object_label == g.object_label && p.attribute == g.attribute + 1 &&
           iou(p.object_box, g.object_box) >= iou_threshold;
}

template <typename Pred, typename Gt, typename Matches>
std::vector<bool> greedy_match(const std::vector<Pred>& preds, const std::vector<Gt>& gt,
                               Matches&& matches) {
    std::vector<bool> flags(preds.size(), false);
    std::vector<bool> consumed(gt.size(), false);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (consumed[g] || !matches(preds[i], gt[g])) continue;
            consumed[g] = true;
            flags[i] = true;
            break;
        }
    }
    return flags;
}

struct PerImage {
    std::vector<TripletPrediction> rels;
    std::vector<AttributePrediction> attrs;
    std::vector<GtRelationship> gt_rels;
    std::vector<GtAttribute> gt_attrs;
};

std::map<std::string, PerImage> group_by_image(const RankedPredictions& preds,
                                               const GroundTruth& gt) {
    std::map<std::string, PerImage> images;
    for (const auto& r : preds.relationships) images[r.image_id].rels.push_back(r);
    for (const auto& a : preds.attributes) images[a.image_id].attrs.push_back(a);
    for (const auto& r : gt.relationships) images[r.image_id].gt_rels.push_back(r);
    for (const auto& a : gt.attributes) images[a.image_id].gt_attrs.push_back(a);
    for (auto& [id, img] : images) {
        std::sort(img.rels.begin(), img.rels.end(), rel_before);
        std::sort(img.attrs.begin(), img.attrs.end(), attr_before);
    }
    return images;
}

// Per-image joint top-k matching used by recall: relationship and
// attribute predictions share the ranking budget.
std::pair<std::size_t, std::size_t> image_recall_counts(const PerImage& img, std::size_t k,
                                                        const MatchCriterion& criterion) {
    // merge the two sorted lists by the canonical order
    std::vector<TripletPrediction> top_rels;
    std::vector<AttributePrediction> top_attrs;
    std::size_t ri = 0;
    std::size_t ai = 0;
    while (top_rels.size() + top_attrs.size() < k &&
           (ri < img.rels.size() || ai < img.attrs.size())) {
        const bool take_rel =
            ai >= img.attrs.size() ||
            (ri < img.rels.size() && img.rels[ri].score >= img.attrs[ai].score);
        if (take_rel) {
            top_rels.push_back(img.rels[ri++]);
        } else {
            top_attrs.push_back(img.attrs[ai++]);
        }
    }
    auto rel_flags = greedy_match(top_rels, img.gt_rels, [&](const auto& p, const auto& g) {
        return rel_matches(p, g, criterion);
    });
    auto attr_flags = greedy_match(top_attrs, img.gt_attrs, [&](const auto& p, const auto& g) {
        return attr_matches(p, g, criterion.iou_threshold);
    });
    const std::size_t matched =
        static_cast<std::size_t>(std::count(rel_flags.begin(), rel_flags.end(), true)) +
        static_cast<std::size_t>(std::count(attr_flags.begin(), attr_flags.end(), true));
    return {matched, img.gt_rels.size() + img.gt_attrs.size()};
}

}  // namespace

std::vector<bool> match_relationships(const std::vector<TripletPrediction>& preds,
                                      const std::vector<GtRelationship>& gt,
                                      const MatchCriterion& criterion) {
    return greedy_match(preds, gt,
                        [&](const auto& p, const auto& g) { return rel_matches(p, g, criterion); });
}

std::vector<bool> match_attributes(const std::vector<AttributePrediction>& preds,
                                   const std::vector<GtAttribute>& gt, double iou_threshold) {
    return greedy_match(preds, gt, [&](const auto& p, const auto& g) {
        return attr_matches(p, g, iou_threshold);
    });
}

double average_precision(const std::vector<std::pair<double, bool>>& ranked_flags,
                         std::size_t n_gt) {
    if (n_gt == 0) return 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < ranked_flags.size(); ++i) {
        if (ranked_flags[i].second) ++tp;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    // precision envelope from the right
    for (std::size_t i = precision.size(); i-- > 1;) {
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double recall_at_k(const RankedPredictions& preds, const GroundTruth& gt,
                   const EvalOptions& options) {
    if (options.recall_k < 1) throw std::invalid_argument("recall k must be >= 1");
    const MatchCriterion criterion{MatchMode::Relationship, options.iou_threshold};
    auto images = group_by_image(preds, gt);
    std::size_t matched_total = 0;
    std::size_t gt_total = 0;
    double macro_sum = 0.0;
    std::size_t macro_images = 0;
    for (const auto& [id, img] : images) {
        auto [matched, n_gt] = image_recall_counts(img, options.recall_k, criterion);
        matched_total += matched;
        gt_total += n_gt;
        if (n_gt > 0) {
            macro_sum += static_cast<double>(matched) / static_cast<double>(n_gt);
            ++macro_images;
        }
    }
    if (gt_total == 0) return 1.0;  // nothing to recall
    if (options.macro_recall) {
        return macro_sum / static_cast<double>(macro_images);
    }
    return static_cast<double>(matched_total) / static_cast<double>(gt_total);
}

EvalReport evaluate(const RankedPredictions& preds, const GroundTruth& gt,
                    const Vocabulary& predicates, const Vocabulary& attributes,
                    const EvalOptions& options) {
    auto images = group_by_image(preds, gt);

    // Pools per class: (score, flag) in canonical order across the dataset.
    auto predicate_ap = [&](int predicate, MatchMode mode) {
        const MatchCriterion criterion{mode, options.iou_threshold};
        std::vector<std::pair<TripletPrediction, bool>> pool;
        std::size_t n_gt = 0;
        for (const auto& [id, img] : images) {
            std::vector<TripletPrediction> cls_preds;
            for (const auto& p : img.rels) {
                if (p.predicate == predicate) cls_preds.push_back(p);
            }
            std::vector<GtRelationship> cls_gt;
            for (const auto& g : img.gt_rels) {
                if (g.predicate == predicate) cls_gt.push_back(g);
            }
            n_gt += cls_gt.size();
            auto flags = match_relationships(cls_preds, cls_gt, criterion);
            for (std::size_t i = 0; i < cls_preds.size(); ++i) {
                pool.emplace_back(cls_preds[i], flags[i]);
            }
        }
        std::sort(pool.begin(), pool.end(),
                  [](const auto& a, const auto& b) { return rel_before(a.first, b.first); });
        std::vector<std::pair<double, bool>> flagged;
        for (const auto& [p, flag] : pool) flagged.emplace_back(p.score, flag);
        return std::pair(n_gt, average_precision(flagged, n_gt));
    };

    auto attribute_ap = [&](int attribute_class) {
        std::vector<std::pair<AttributePrediction, bool>> pool;
        std::size_t n_gt = 0;
        for (const auto& [id, img] : images) {
            std::vector<AttributePrediction> cls_preds;
            for (const auto& p : img.attrs) {
                if (p.attribute == attribute_class) cls_preds.push_back(p);
            }
            std::vector<GtAttribute> cls_gt;
            for (const auto& g : img.gt_attrs) {
                if (g.attribute + 1 == attribute_class) cls_gt.push_back(g);
            }
            n_gt += cls_gt.size();
            auto flags = match_attributes(cls_preds, cls_gt, options.iou_threshold);
            for (std::size_t i = 0; i < cls_preds.size(); ++i) {
                pool.emplace_back(cls_preds[i], flags[i]);
            }
        }
        std::sort(pool.begin(), pool.end(),
                  [](const auto& a, const auto& b) { return attr_before(a.first, b.first); });
        std::vector<std::pair<double, bool>> flagged;
        for (const auto& [p, flag] : pool) flagged.emplace_back(p.score, flag);
        return std::pair(n_gt, average_precision(flagged, n_gt));
    };

    EvalReport report;
    double sum_rel = 0.0;
    double sum_phr = 0.0;
    std::size_t n_classes_rel = 0;
    std::size_t n_classes_phr = 0;
    for (std::size_t p = 1; p < predicates.size(); ++p) {
        auto [n_gt_rel, ap_rel] = predicate_ap(static_cast<int>(p), MatchMode::Relationship);
        if (n_gt_rel > 0) {
            report.per_class_ap_rel.emplace_back(predicates.name(static_cast<int>(p)), ap_rel);
            sum_rel += ap_rel;
            ++n_classes_rel;
        }
        auto [n_gt_phr, ap_phr] = predicate_ap(static_cast<int>(p), MatchMode::Phrase);
        if (n_gt_phr > 0) {
            report.per_class_ap_phr.emplace_back(predicates.name(static_cast<int>(p)), ap_phr);
            sum_phr += ap_phr;
            ++n_classes_phr;
        }
    }
    // attribute classes fold into both class averages, matched on the
    // object box in either mode
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        auto [n_gt, ap] = attribute_ap(static_cast<int>(a) + 1);
        if (n_gt > 0) {
            const std::string name = "is_" + attributes.name(static_cast<int>(a));
            report.per_class_ap_rel.emplace_back(name, ap);
            report.per_class_ap_phr.emplace_back(name, ap);
            sum_rel += ap;
            sum_phr += ap;
            ++n_classes_rel;
            ++n_classes_phr;
        }
    }
    report.map_rel = n_classes_rel == 0 ? 0.0 : sum_rel / static_cast<double>(n_classes_rel);
    report.map_phr = n_classes_phr == 0 ? 0.0 : sum_phr / static_cast<double>(n_classes_phr);
    report.recall_at_k = recall_at_k(preds, gt, options);
    report.final_score = weighted_score(report.recall_at_k, report.map_rel, report.map_phr);
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "R@50      " << report.recall_at_k * 100.0 << '\n';
    out << "mAP_rel   " << report.map_rel * 100.0 << '\n';
    out << "mAP_phr   " << report.map_phr * 100.0 << '\n';
    out << "score     " << report.final_score * 100.0 << '\n';
    out << '\n';
    out << "per-class AP (relationship criterion)\n";
    for (const auto& [name, ap] : report.per_class_ap_rel) {
        out << "  " << std::left << std::setw(20) << name << std::right << ap * 100.0 << '\n';
    }
    out << "per-class AP (phrase criterion)\n";
    for (const auto& [name, ap] : report.per_class_ap_phr) {
        out << "  " << std::left << std::setw(20) << name << std::right << ap * 100.0 << '\n';
    }
    return out.str();
}

void write_report(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << format_report(report);
}

}  // namespace vrd

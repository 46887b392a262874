#pragma once

#include <string>
#include <vector>

#include "vrd/data_io.hpp"
#include "vrd/ranker.hpp"

namespace vrd {

enum class MatchMode { Relationship, Phrase };

struct MatchCriterion {
    MatchMode mode = MatchMode::Relationship;
    double iou_threshold = 0.5;
};

struct EvalOptions {
    double iou_threshold = 0.5;
    std::size_t recall_k = 50;
    bool macro_recall = false;  // per-image mean instead of dataset pooling
};

struct EvalReport {
    double recall_at_k = 0.0;
    double map_rel = 0.0;
    double map_phr = 0.0;
    double final_score = 0.0;
    // class name -> AP, one table per criterion; classes with no GT excluded
    std::vector<std::pair<std::string, double>> per_class_ap_rel;
    std::vector<std::pair<std::string, double>> per_class_ap_phr;
};

// 0.2 * R@50 + 0.4 * mAP_rel + 0.4 * mAP_phr
inline double weighted_score(double recall, double map_rel, double map_phr) {
    return 0.2 * recall + 0.4 * map_rel + 0.4 * map_phr;
}

// Greedy matching in list order; each GT is consumed at most once.
// Relationship mode requires subject and object IoU >= t with all three
// labels equal; phrase mode matches the union boxes instead.
std::vector<bool> match_relationships(const std::vector<TripletPrediction>& preds,
                                      const std::vector<GtRelationship>& gt,
                                      const MatchCriterion& criterion);

// Attribute predictions match on object box IoU plus both labels,
// identically in both criteria.
std::vector<bool> match_attributes(const std::vector<AttributePrediction>& preds,
                                   const std::vector<GtAttribute>& gt, double iou_threshold);

// Area under the precision-recall curve with all-point interpolation
// (precision envelope). Items must be (score, is_true_positive) in final
// ranked order; recall is normalized by n_gt.
double average_precision(const std::vector<std::pair<double, bool>>& ranked_flags,
                         std::size_t n_gt);

double recall_at_k(const RankedPredictions& preds, const GroundTruth& gt,
                   const EvalOptions& options);

EvalReport evaluate(const RankedPredictions& preds, const GroundTruth& gt,
                    const Vocabulary& predicates, const Vocabulary& attributes,
                    const EvalOptions& options = {});

// Report formatted like a leaderboard table: headline numbers and the
// per-class AP tables, x100 with 2 decimals.
std::string format_report(const EvalReport& report);
void write_report(const std::string& path, const EvalReport& report);

}  // namespace vrd

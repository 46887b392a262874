#pragma once

#include <string>
#include <vector>

#include "vrd/attribute.hpp"
#include "vrd/data_io.hpp"
#include "vrd/freq_table.hpp"
#include "vrd/fusion.hpp"
#include "vrd/geometry.hpp"

namespace vrd {

struct TripletPrediction {
    std::string image_id;
    int subject_label = 0;
    Box subject_box;
    int object_label = 0;
    Box object_box;
    int predicate = 0;  // >= 1
    double score = 0.0;
    // detection indices, kept for deterministic tie-breaking
    int subject_index = 0;
    int object_index = 0;
};

struct AttributePrediction {
    std::string image_id;
    int object_label = 0;
    Box object_box;
    int attribute = 0;  // class index >= 1 (vocab index + 1)
    double score = 0.0;
    int object_index = 0;
};

struct RankedPredictions {
    std::vector<TripletPrediction> relationships;
    std::vector<AttributePrediction> attributes;
};

// All ordered pairs (i, j), i != j: n(n-1) proposals for n detections.
std::vector<std::pair<int, int>> make_proposals(const ImageRecord& image);

inline double score_triplet(double s_subject, double s_predicate, double s_object) {
    return s_subject * s_predicate * s_object;
}

inline double score_attribute(double s_object, double s_attribute) {
    return s_object * s_attribute;
}

// Merged sort by score descending, truncated to k. Ties break by
// (kind: relationship first, subject index, object index, class index)
// ascending, so output is fully deterministic.
RankedPredictions rank_top_k(std::vector<TripletPrediction> rels,
                             std::vector<AttributePrediction> attrs, std::size_t k = 200);

struct InferOptions {
    std::size_t top_k = 200;
    // max predicates emitted per pair; 0 means all K-1
    std::size_t per_pair_predicate_cap = 0;
    // rank with the frequency-table probability alone as S_P
    bool baseline = false;
    bool disable_spatial = false;
    bool disable_solo_heads = false;
};

// Full per-image inference: predicate scores for every ordered pair,
// attribute scores for every detection, then top-k ranking.
RankedPredictions infer_image(const std::string& image_id, const ImageRecord& image,
                              const FeatureStore& features, const PairFeatureTable& pair_features,
                              const FreqTable& freq, const FusionModel* fusion,
                              const AttributeModel* attrs, const InferOptions& options);

// Prediction file: GT schema plus a trailing score.
void write_predictions(const std::string& path, const std::vector<RankedPredictions>& per_image,
                       const Vocabulary& objects, const Vocabulary& predicates,
                       const Vocabulary& attributes);
RankedPredictions read_predictions(const std::string& path, const Vocabulary& objects,
                                   const Vocabulary& predicates, const Vocabulary& attributes);

}  // namespace vrd

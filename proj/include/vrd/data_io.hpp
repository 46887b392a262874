#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vrd/geometry.hpp"
#include "vrd/vocab.hpp"

namespace vrd {

// Dense pool of feature rows referenced by Detection::feature_ref and the
// pair-feature table. Immutable after load.
class FeatureStore {
public:
    FeatureStore() = default;
    FeatureStore(std::size_t dim, std::vector<float> values);

    std::size_t dim() const { return dim_; }
    std::size_t count() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    std::span<const float> row(std::uint32_t ref) const;
    void append_row(std::span<const float> row);

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

struct GtRelationship {
    std::string image_id;
    int subject_label = 0;
    Box subject_box;
    int object_label = 0;
    Box object_box;
    int predicate = 0;  // >= 1, never no_relationship
};

struct GtAttribute {
    std::string image_id;
    int object_label = 0;
    Box object_box;
    int attribute = 0;  // index into the attribute vocabulary
};

struct GroundTruth {
    std::vector<GtRelationship> relationships;
    std::vector<GtAttribute> attributes;
};

struct ImageRecord {
    ImageSize size;
    std::vector<Detection> detections;
};

// Detections grouped by image, ordered by image_id for determinism.
using DetectionSet = std::map<std::string, ImageRecord>;

// (image_id, subject det index, object det index) -> feature_ref of the
// union-box feature used as v_P.
using PairFeatureTable = std::map<std::tuple<std::string, int, int>, std::uint32_t>;

// Everything one pipeline stage consumes, loaded and cross-validated.
struct Dataset {
    DetectionSet detections;
    FeatureStore features;
    PairFeatureTable pair_features;
    GroundTruth gt;
};

DetectionSet read_detections(const std::string& path, const Vocabulary& objects);
void write_detections(const std::string& path, const DetectionSet& dets,
                      const Vocabulary& objects);

FeatureStore read_features(const std::string& path);
void write_features(const std::string& path, const FeatureStore& store);

GroundTruth read_gt(const std::string& path, const Vocabulary& objects,
                    const Vocabulary& predicates, const Vocabulary& attributes);
void write_gt(const std::string& path, const GroundTruth& gt, const Vocabulary& objects,
              const Vocabulary& predicates, const Vocabulary& attributes);

PairFeatureTable read_pair_features(const std::string& path);
void write_pair_features(const std::string& path, const PairFeatureTable& table);

// Checks that every feature_ref in dets (and the pair table) resolves.
void validate_refs(const DetectionSet& dets, const PairFeatureTable& pairs,
                   const FeatureStore& store);

}  // namespace vrd

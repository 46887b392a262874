#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "vrd/data_io.hpp"
#include "vrd/freq_table.hpp"
#include "vrd/mlp.hpp"
#include "vrd/spatial.hpp"

namespace vrd {

// One training example for the relationship classifier. sem_logits are a
// frozen prior: they enter the logit sum but receive no gradient.
struct TrainPair {
    SpatialFeature spatial{};
    std::vector<double> v_subject;
    std::vector<double> v_pair;
    std::vector<double> v_object;
    std::vector<double> sem_logits;
    int target = 0;  // 0 = no_relationship
};

// Spatial branch, visual <S,P,O> branch, and the two solo heads. All four
// produce K logits that are summed with the semantic logits before softmax.
struct FusionModel {
    std::size_t num_classes = 0;  // K, incl. no_relationship
    std::size_t feature_dim = 0;  // D
    MlpParams spatial_branch;     // 22 -> hidden -> hidden -> K
    MlpParams visual_branch;      // 3D -> hidden -> hidden -> K
    MlpParams subject_head;       // D -> K
    MlpParams object_head;        // D -> K
    bool use_spatial = true;
    bool use_solo_heads = true;
};

struct FusionGrads {
    MlpGrads spatial;
    MlpGrads visual;
    MlpGrads subject;
    MlpGrads object;

    explicit FusionGrads(const FusionModel& model);
    void clear();
};

struct TrainConfig {
    std::size_t epochs = 8;
    double neg_pos_ratio = 3.0;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double iou_match = 0.5;
};

FusionModel init_fusion_model(std::size_t num_classes, std::size_t feature_dim,
                              std::size_t spatial_hidden, std::size_t visual_hidden,
                              std::uint64_t seed);

struct FusionOutput {
    std::vector<double> logits;
    std::vector<double> probs;
};

FusionOutput fusion_forward(const FusionModel& model, const TrainPair& pair);

// Mean cross-entropy over the batch plus analytic gradients for every
// trainable parameter. Disabled branches get neither output nor gradient.
double fusion_loss_and_grads(const FusionModel& model, std::span<const TrainPair> batch,
                             FusionGrads& grads);

// Ordered detection pair with its assigned class.
struct PairSample {
    int subject_index = 0;
    int object_index = 0;
    int target = 0;
};

// Positive iff both boxes match a GT relationship at IoU >= iou_match with
// matching labels; negatives subsampled to ratio x positives (at most 3
// when an image has no positives).
std::vector<PairSample> sample_pairs(const ImageRecord& image,
                                     std::span<const GtRelationship> image_gt,
                                     double neg_pos_ratio, double iou_match,
                                     std::mt19937_64& rng);

TrainPair make_train_pair(const std::string& image_id, const ImageRecord& image,
                          const PairSample& sample, const FeatureStore& features,
                          const PairFeatureTable& pair_features, const FreqTable& freq);

// Minibatch SGD with momentum; fully deterministic in config.seed.
// Returns the per-epoch mean loss trace.
std::vector<double> train_fusion(FusionModel& model, const Dataset& data, const FreqTable& freq,
                                 const TrainConfig& config);

// Assembles the pair inputs for detections i, j of one image and runs the
// fused forward pass. Returns probabilities over all K classes.
std::vector<double> predict_predicate(const FusionModel& model, const FreqTable& freq,
                                      const std::string& image_id, const ImageRecord& image,
                                      int subject_index, int object_index,
                                      const FeatureStore& features,
                                      const PairFeatureTable& pair_features);

void save_fusion_model(const std::string& path, const FusionModel& model);
FusionModel load_fusion_model(const std::string& path);

}  // namespace vrd

#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "vrd/data_io.hpp"
#include "vrd/fusion.hpp"
#include "vrd/mlp.hpp"

namespace vrd {

// Single-branch attribute classifier over A+1 classes; class 0 is the
// no_attribute background, class a >= 1 maps to attribute vocabulary
// index a-1.
struct AttributeModel {
    std::size_t num_classes = 0;  // A + 1
    std::size_t feature_dim = 0;  // D
    MlpParams head;               // D -> hidden -> A+1
};

struct AttributeSample {
    int detection_index = 0;
    int target = 0;  // 0 = no_attribute
};

AttributeModel init_attribute_model(std::size_t num_attributes, std::size_t feature_dim,
                                    std::size_t hidden, std::uint64_t seed);

std::vector<double> attribute_scores(const AttributeModel& model,
                                     std::span<const double> v_object);

double attribute_loss_and_grads(const AttributeModel& model,
                                std::span<const std::pair<std::vector<double>, int>> batch,
                                MlpGrads& grads);

// Positive iff the detection matches a GtAttribute at IoU >= iou_match with
// matching object label; negatives subsampled at neg_pos_ratio (default 1).
std::vector<AttributeSample> sample_attribute_targets(const ImageRecord& image,
                                                      std::span<const GtAttribute> image_gt,
                                                      double neg_pos_ratio, double iou_match,
                                                      std::mt19937_64& rng);

std::vector<double> train_attributes(AttributeModel& model, const Dataset& data,
                                     const TrainConfig& config);

void save_attribute_model(const std::string& path, const AttributeModel& model);
AttributeModel load_attribute_model(const std::string& path);

}  // namespace vrd

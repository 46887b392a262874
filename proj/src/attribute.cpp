#include "vrd/attribute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "checkpoint.hpp"

namespace vrd {

AttributeModel init_attribute_model(std::size_t num_attributes, std::size_t feature_dim,
                                    std::size_t hidden, std::uint64_t seed) {
    if (num_attributes == 0 || feature_dim == 0) {
        throw std::invalid_argument("attribute model needs A >= 1 and D >= 1");
    }
    std::mt19937_64 rng(seed);
    AttributeModel model;
    model.num_classes = num_attributes + 1;
    model.feature_dim = feature_dim;
    model.head = make_mlp({feature_dim, hidden, model.num_classes}, Activation::Relu, rng);
    return model;
}

std::vector<double> attribute_scores(const AttributeModel& model,
                                     std::span<const double> v_object) {
    if (v_object.size() != model.feature_dim) {
        throw std::invalid_argument("attribute feature dim mismatch: got " +
                                    std::to_string(v_object.size()) + ", expected " +
                                    std::to_string(model.feature_dim));
    }
    return softmax(mlp_forward(model.head, v_object));
}

double attribute_loss_and_grads(const AttributeModel& model,
                                std::span<const std::pair<std::vector<double>, int>> batch,
                                MlpGrads& grads) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    grads.clear();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    MlpCache cache;
    for (const auto& [features, target] : batch) {
        auto probs = softmax(mlp_forward(model.head, features, &cache));
        loss -= std::log(std::max(probs[static_cast<std::size_t>(target)], 1e-300)) * inv_n;
        std::vector<double> d_logits = std::move(probs);
        d_logits[static_cast<std::size_t>(target)] -= 1.0;
        for (auto& v : d_logits) v *= inv_n;
        mlp_backward(model.head, cache, d_logits, grads);
    }
    return loss;
}

std::vector<AttributeSample> sample_attribute_targets(const ImageRecord& image,
                                                      std::span<const GtAttribute> image_gt,
                                                      double neg_pos_ratio, double iou_match,
                                                      std::mt19937_64& rng) {
    if (neg_pos_ratio < 0.0) throw std::invalid_argument("neg_pos_ratio must be nonnegative");
    std::vector<AttributeSample> positives;
    std::vector<AttributeSample> negatives;
    for (int i = 0; i < static_cast<int>(image.detections.size()); ++i) {
        const Detection& d = image.detections[static_cast<std::size_t>(i)];
        int best_target = 0;
        double best_iou = -1.0;
        for (const auto& g : image_gt) {
            if (g.object_label != d.label) continue;
            const double v = iou(d.box, g.object_box);
            if (v >= iou_match && v > best_iou) {
                best_iou = v;
                best_target = g.attribute + 1;  // class = vocab index + 1
            }
        }
        if (best_target > 0) {
            positives.push_back({i, best_target});
        } else {
            negatives.push_back({i, 0});
        }
    }
    std::size_t keep;
    if (positives.empty()) {
        keep = std::min<std::size_t>(negatives.size(), 3);
    } else {
        keep = std::min<std::size_t>(
            negatives.size(),
            static_cast<std::size_t>(neg_pos_ratio * static_cast<double>(positives.size())));
    }
    std::shuffle(negatives.begin(), negatives.end(), rng);
    negatives.resize(keep);
    std::sort(negatives.begin(), negatives.end(),
              [](const AttributeSample& a, const AttributeSample& b) {
                  return a.detection_index < b.detection_index;
              });
    positives.insert(positives.end(), negatives.begin(), negatives.end());
    return positives;
}

std::vector<double> train_attributes(AttributeModel& model, const Dataset& data,
                                     const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

    std::unordered_map<std::string, std::vector<GtAttribute>> gt_by_image;
    for (const auto& a : data.gt.attributes) gt_by_image[a.image_id].push_back(a);

    std::mt19937_64 rng(config.seed);
    std::vector<std::pair<std::vector<double>, int>> examples;
    for (const auto& [image_id, image] : data.detections) {
        auto it = gt_by_image.find(image_id);
        static const std::vector<GtAttribute> kEmpty;
        const auto& image_gt = it == gt_by_image.end() ? kEmpty : it->second;
        for (const auto& sample : sample_attribute_targets(image, image_gt, config.neg_pos_ratio,
                                                           config.iou_match, rng)) {
            const Detection& d =
                image.detections[static_cast<std::size_t>(sample.detection_index)];
            if (!d.feature_ref) {
                throw std::runtime_error("detection in " + image_id + " has no feature_ref");
            }
            auto row = data.features.row(*d.feature_ref);
            examples.emplace_back(std::vector<double>(row.begin(), row.end()), sample.target);
        }
    }
    if (examples.empty()) throw std::runtime_error("no attribute training samples");

    SgdState state(model.head);
    MlpGrads grads(model.head);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> trace;
    std::vector<std::pair<std::vector<double>, int>> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
            const double loss = attribute_loss_and_grads(model, batch, grads);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("attribute training diverged at epoch " +
                                         std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();
            sgd_step(model.head, grads, state, config.learning_rate, config.momentum);
        }
        trace.push_back(epoch_loss / static_cast<double>(seen));
    }
    return trace;
}

void save_attribute_model(const std::string& path, const AttributeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    ckpt::put_header(out, ckpt::kKindAttribute);
    ckpt::put_u32(out, static_cast<std::uint32_t>(model.num_classes));
    ckpt::put_u32(out, static_cast<std::uint32_t>(model.feature_dim));
    ckpt::put_mlp(out, model.head);
}

AttributeModel load_attribute_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    ckpt::check_header(in, ckpt::kKindAttribute, path);
    AttributeModel model;
    model.num_classes = ckpt::get_u32(in, path);
    model.feature_dim = ckpt::get_u32(in, path);
    model.head = ckpt::get_mlp(in, path);
    return model;
}

}  // namespace vrd

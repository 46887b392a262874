#include "vrd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "checkpoint.hpp"

namespace vrd {
namespace {

std::vector<double> to_doubles(std::span<const float> row) {
    return std::vector<double>(row.begin(), row.end());
}

void add_into(std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

void check_dim(std::size_t got, std::size_t want, const char* branch) {
    if (got != want) {
        throw std::invalid_argument(std::string(branch) + " input dim mismatch: got " +
                                    std::to_string(got) + ", expected " + std::to_string(want));
    }
}

struct ForwardCaches {
    MlpCache spatial;
    MlpCache visual;
    MlpCache subject;
    MlpCache object;
};

FusionOutput forward_impl(const FusionModel& model, const TrainPair& pair, ForwardCaches* caches) {
    const std::size_t k = model.num_classes;
    check_dim(pair.sem_logits.size(), k, "semantic prior");
    check_dim(pair.v_subject.size(), model.feature_dim, "subject head");
    check_dim(pair.v_object.size(), model.feature_dim, "object head");
    check_dim(pair.v_pair.size(), model.feature_dim, "visual branch (pair feature)");

    FusionOutput out;
    out.logits = pair.sem_logits;

    if (model.use_spatial) {
        add_into(out.logits, mlp_forward(model.spatial_branch,
                                         std::span<const double>(pair.spatial),
                                         caches ? &caches->spatial : nullptr));
    }
    std::vector<double> visual_in;
    visual_in.reserve(3 * model.feature_dim);
    visual_in.insert(visual_in.end(), pair.v_subject.begin(), pair.v_subject.end());
    visual_in.insert(visual_in.end(), pair.v_pair.begin(), pair.v_pair.end());
    visual_in.insert(visual_in.end(), pair.v_object.begin(), pair.v_object.end());
    add_into(out.logits,
             mlp_forward(model.visual_branch, visual_in, caches ? &caches->visual : nullptr));
    if (model.use_solo_heads) {
        add_into(out.logits, mlp_forward(model.subject_head, pair.v_subject,
                                         caches ? &caches->subject : nullptr));
        add_into(out.logits, mlp_forward(model.object_head, pair.v_object,
                                         caches ? &caches->object : nullptr));
    }
    out.probs = softmax(out.logits);
    return out;
}

}  // namespace

FusionGrads::FusionGrads(const FusionModel& model)
    : spatial(model.spatial_branch),
      visual(model.visual_branch),
      subject(model.subject_head),
      object(model.object_head) {}

void FusionGrads::clear() {
    spatial.clear();
    visual.clear();
    subject.clear();
    object.clear();
}

FusionModel init_fusion_model(std::size_t num_classes, std::size_t feature_dim,
                              std::size_t spatial_hidden, std::size_t visual_hidden,
                              std::uint64_t seed) {
    if (num_classes < 2 || feature_dim == 0) {
        throw std::invalid_argument("fusion model needs K >= 2 and D >= 1");
    }
    std::mt19937_64 rng(seed);
    FusionModel model;
    model.num_classes = num_classes;
    model.feature_dim = feature_dim;
    model.spatial_branch =
        make_mlp({kSpatialDim, spatial_hidden, spatial_hidden, num_classes}, Activation::Relu, rng);
    model.visual_branch = make_mlp({3 * feature_dim, visual_hidden, visual_hidden, num_classes},
                                   Activation::Relu, rng);
    model.subject_head = make_mlp({feature_dim, num_classes}, Activation::Relu, rng);
    model.object_head = make_mlp({feature_dim, num_classes}, Activation::Relu, rng);
    return model;
}

FusionOutput fusion_forward(const FusionModel& model, const TrainPair& pair) {
    return forward_impl(model, pair, nullptr);
}

double fusion_loss_and_grads(const FusionModel& model, std::span<const TrainPair> batch,
                             FusionGrads& grads) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    grads.clear();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    ForwardCaches caches;
    for (const auto& pair : batch) {
        FusionOutput out = forward_impl(model, pair, &caches);
        const std::size_t target = static_cast<std::size_t>(pair.target);
        loss -= std::log(std::max(out.probs[target], 1e-300)) * inv_n;
        // dLoss/dlogits for mean cross-entropy
        std::vector<double> d_logits = out.probs;
        d_logits[target] -= 1.0;
        for (auto& v : d_logits) v *= inv_n;
        if (model.use_spatial) {
            mlp_backward(model.spatial_branch, caches.spatial, d_logits, grads.spatial);
        }
        mlp_backward(model.visual_branch, caches.visual, d_logits, grads.visual);
        if (model.use_solo_heads) {
            mlp_backward(model.subject_head, caches.subject, d_logits, grads.subject);
            mlp_backward(model.object_head, caches.object, d_logits, grads.object);
        }
        // sem_logits are a frozen prior: no gradient flows into them
    }
    return loss;
}

std::vector<PairSample> sample_pairs(const ImageRecord& image,
                                     std::span<const GtRelationship> image_gt,
                                     double neg_pos_ratio, double iou_match,
                                     std::mt19937_64& rng) {
    if (neg_pos_ratio < 0.0) throw std::invalid_argument("neg_pos_ratio must be nonnegative");
    const int n = static_cast<int>(image.detections.size());
    std::vector<PairSample> positives;
    std::vector<PairSample> negatives;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const Detection& s = image.detections[static_cast<std::size_t>(i)];
            const Detection& o = image.detections[static_cast<std::size_t>(j)];
            int best_predicate = 0;
            double best_quality = -1.0;
            for (const auto& r : image_gt) {
                if (r.subject_label != s.label || r.object_label != o.label) continue;
                const double iou_s = iou(s.box, r.subject_box);
                const double iou_o = iou(o.box, r.object_box);
                if (iou_s < iou_match || iou_o < iou_match) continue;
                const double quality = std::min(iou_s, iou_o);
                if (quality > best_quality) {
                    best_quality = quality;
                    best_predicate = r.predicate;
                }
            }
            if (best_predicate > 0) {
                positives.push_back({i, j, best_predicate});
            } else {
                negatives.push_back({i, j, 0});
            }
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
    std::sort(negatives.begin(), negatives.end(), [](const PairSample& a, const PairSample& b) {
        return std::tie(a.subject_index, a.object_index) < std::tie(b.subject_index, b.object_index);
    });
    positives.insert(positives.end(), negatives.begin(), negatives.end());
    return positives;
}

TrainPair make_train_pair(const std::string& image_id, const ImageRecord& image,
                          const PairSample& sample, const FeatureStore& features,
                          const PairFeatureTable& pair_features, const FreqTable& freq) {
    const Detection& s = image.detections[static_cast<std::size_t>(sample.subject_index)];
    const Detection& o = image.detections[static_cast<std::size_t>(sample.object_index)];
    if (!s.feature_ref || !o.feature_ref) {
        throw std::runtime_error("detection in " + image_id + " has no feature_ref");
    }
    auto pf = pair_features.find({image_id, sample.subject_index, sample.object_index});
    if (pf == pair_features.end()) {
        throw std::runtime_error("missing pair feature for " + image_id + " (" +
                                 std::to_string(sample.subject_index) + "," +
                                 std::to_string(sample.object_index) + ")");
    }
    TrainPair pair;
    pair.spatial = spatial_feature(s.box, o.box, image.size);
    pair.v_subject = to_doubles(features.row(*s.feature_ref));
    pair.v_object = to_doubles(features.row(*o.feature_ref));
    pair.v_pair = to_doubles(features.row(pf->second));
    pair.sem_logits = freq.logits(s.label, o.label);
    pair.target = sample.target;
    return pair;
}

std::vector<double> train_fusion(FusionModel& model, const Dataset& data, const FreqTable& freq,
                                 const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

    std::unordered_map<std::string, std::vector<GtRelationship>> gt_by_image;
    for (const auto& r : data.gt.relationships) gt_by_image[r.image_id].push_back(r);

    std::mt19937_64 rng(config.seed);
    std::vector<TrainPair> pairs;
    for (const auto& [image_id, image] : data.detections) {
        auto it = gt_by_image.find(image_id);
        static const std::vector<GtRelationship> kEmpty;
        const auto& image_gt = it == gt_by_image.end() ? kEmpty : it->second;
        for (const auto& sample :
             sample_pairs(image, image_gt, config.neg_pos_ratio, config.iou_match, rng)) {
            pairs.push_back(
                make_train_pair(image_id, image, sample, data.features, data.pair_features, freq));
        }
    }
    if (pairs.empty()) throw std::runtime_error("no training pairs sampled");

    SgdState spatial_state(model.spatial_branch);
    SgdState visual_state(model.visual_branch);
    SgdState subject_state(model.subject_head);
    SgdState object_state(model.object_head);
    FusionGrads grads(model);

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> trace;
    std::vector<TrainPair> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
            const double loss = fusion_loss_and_grads(model, batch, grads);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();
            if (model.use_spatial) {
                sgd_step(model.spatial_branch, grads.spatial, spatial_state, config.learning_rate,
                         config.momentum);
            }
            sgd_step(model.visual_branch, grads.visual, visual_state, config.learning_rate,
                     config.momentum);
            if (model.use_solo_heads) {
                sgd_step(model.subject_head, grads.subject, subject_state, config.learning_rate,
                         config.momentum);
                sgd_step(model.object_head, grads.object, object_state, config.learning_rate,
                         config.momentum);
            }
        }
        trace.push_back(epoch_loss / static_cast<double>(seen));
    }
    return trace;
}

std::vector<double> predict_predicate(const FusionModel& model, const FreqTable& freq,
                                      const std::string& image_id, const ImageRecord& image,
                                      int subject_index, int object_index,
                                      const FeatureStore& features,
                                      const PairFeatureTable& pair_features) {
    PairSample sample{subject_index, object_index, 0};
    TrainPair pair = make_train_pair(image_id, image, sample, features, pair_features, freq);
    return fusion_forward(model, pair).probs;
}

void save_fusion_model(const std::string& path, const FusionModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    ckpt::put_header(out, ckpt::kKindFusion);
    ckpt::put_u32(out, static_cast<std::uint32_t>(model.num_classes));
    ckpt::put_u32(out, static_cast<std::uint32_t>(model.feature_dim));
    ckpt::put_u32(out, (model.use_spatial ? 1u : 0u) | (model.use_solo_heads ? 2u : 0u));
    ckpt::put_mlp(out, model.spatial_branch);
    ckpt::put_mlp(out, model.visual_branch);
    ckpt::put_mlp(out, model.subject_head);
    ckpt::put_mlp(out, model.object_head);
}

FusionModel load_fusion_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    ckpt::check_header(in, ckpt::kKindFusion, path);
    FusionModel model;
    model.num_classes = ckpt::get_u32(in, path);
    model.feature_dim = ckpt::get_u32(in, path);
    const std::uint32_t flags = ckpt::get_u32(in, path);
    model.use_spatial = (flags & 1u) != 0;
    model.use_solo_heads = (flags & 2u) != 0;
    model.spatial_branch = ckpt::get_mlp(in, path);
    model.visual_branch = ckpt::get_mlp(in, path);
    model.subject_head = ckpt::get_mlp(in, path);
    model.object_head = ckpt::get_mlp(in, path);
    return model;
}

}  // namespace vrd

#include "vrd/synth.hpp"

#include <random>
#include <sstream>

namespace vrd {
namespace {

constexpr double kImageW = 640.0;
constexpr double kImageH = 480.0;

std::vector<float> prototype(std::uint64_t key, std::size_t dim) {
    // fixed stream per key so prototypes are shared across world seeds
    std::mt19937_64 rng(0x9E3779B97F4A7C15ull ^ key);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(normal(rng));
    return v;
}

std::vector<float> label_prototype(int label, std::size_t dim) {
    return prototype(0x1000u + static_cast<std::uint64_t>(label), dim);
}

std::vector<float> attribute_prototype(int attribute, std::size_t dim) {
    return prototype(0x2000u + static_cast<std::uint64_t>(attribute), dim);
}

std::vector<float> interaction_prototype(int predicate, std::size_t dim) {
    return prototype(0x3000u + static_cast<std::uint64_t>(predicate), dim);
}

bool horizontal_overlap(const Box& a, const Box& b) {
    return a.x_min < b.x_max && b.x_min < a.x_max;
}

bool contains(const Box& outer, const Box& inner) {
    return inner.x_min >= outer.x_min && inner.x_max <= outer.x_max &&
           inner.y_min >= outer.y_min && inner.y_max <= outer.y_max;
}

}  // namespace

Vocabulary synth_object_vocab() {
    return Vocabulary(VocabKind::Object,
                      {"person", "dog", "horse", "car", "chair", "table", "cup", "guitar"});
}

Vocabulary synth_predicate_vocab() {
    return Vocabulary(VocabKind::Predicate, {Vocabulary::kNoRelationship, "above", "below",
                                             "inside_of", "on", "under", "ride", "hold", "wear",
                                             "near"});
}

Vocabulary synth_attribute_vocab() {
    return Vocabulary(VocabKind::Attribute,
                      {"wooden", "plastic", "transparent", "textile", "leather"});
}

int favored_predicate(int subject_label, int object_label, std::size_t num_predicates) {
    const std::size_t n_interaction = num_predicates - kFirstInteractionPredicate;
    const std::uint64_t h = static_cast<std::uint64_t>(subject_label) * 31u +
                            static_cast<std::uint64_t>(object_label) * 17u;
    return kFirstInteractionPredicate + static_cast<int>(h % n_interaction);
}

int favored_attribute(int label, std::size_t num_attributes) {
    return static_cast<int>((static_cast<std::uint64_t>(label) * 13u + 5u) % num_attributes);
}

int geometric_predicate(const Box& subject, const Box& object) {
    if (subject.y_max <= object.y_min && horizontal_overlap(subject, object)) return 1;  // above
    if (subject.y_min >= object.y_max && horizontal_overlap(subject, object)) return 2;  // below
    if (contains(object, subject)) return 3;                                             // inside_of
    return 0;
}

Dataset synth_world(const SynthConfig& config) {
    if (config.n_objects_per_image < 2) {
        throw std::invalid_argument("synth_world needs at least 2 objects per image");
    }
    const Vocabulary objects = synth_object_vocab();
    const Vocabulary predicates = synth_predicate_vocab();
    const Vocabulary attributes = synth_attribute_vocab();
    const std::size_t num_predicates = predicates.size();
    const std::size_t dim = config.feature_dim;

    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> label_dist(0, static_cast<int>(objects.size()) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> size_dist(40.0, 160.0);
    std::uniform_real_distribution<double> score_dist(0.6, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<int> interaction_dist(
        kFirstInteractionPredicate, static_cast<int>(num_predicates) - 1);
    std::uniform_int_distribution<int> attr_dist(0, static_cast<int>(attributes.size()) - 1);

    Dataset data;
    data.features = FeatureStore();
    std::uint32_t next_ref = 0;

    auto noisy_feature = [&](const std::vector<float>& base,
                             const std::vector<float>* extra) {
        std::vector<float> v(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            double x = base[k] + (extra ? (*extra)[k] : 0.0);
            x += config.feature_noise * noise(rng);
            v[k] = static_cast<float>(x);
        }
        return v;
    };

    for (std::size_t img_i = 0; img_i < config.n_images; ++img_i) {
        std::ostringstream id_stream;
        id_stream << config.image_prefix;
        id_stream.fill('0');
        id_stream.width(6);
        id_stream << img_i;
        const std::string image_id = id_stream.str();

        ImageRecord image;
        image.size = {kImageW, kImageH};
        std::vector<int> object_attrs;  // -1 = none

        for (std::size_t oi = 0; oi < config.n_objects_per_image; ++oi) {
            Detection det;
            det.image_id = image_id;
            det.label = label_dist(rng);
            const double w = size_dist(rng);
            const double h = size_dist(rng);
            const double x0 = unit(rng) * (kImageW - w);
            const double y0 = unit(rng) * (kImageH - h);
            det.box = {x0, y0, x0 + w, y0 + h};
            det.score = score_dist(rng);

            int attr = -1;
            if (unit(rng) < config.attribute_prob) {
                attr = (unit(rng) < config.predicate_bias)
                           ? favored_attribute(det.label, attributes.size())
                           : attr_dist(rng);
                data.gt.attributes.push_back({image_id, det.label, det.box, attr});
            }
            object_attrs.push_back(attr);

            const auto base = label_prototype(det.label, dim);
            std::vector<float> extra;
            if (attr >= 0) extra = attribute_prototype(attr, dim);
            auto feature = noisy_feature(base, attr >= 0 ? &extra : nullptr);
            data.features.append_row(feature);
            det.feature_ref = next_ref++;
            image.detections.push_back(std::move(det));
        }

        const int n = static_cast<int>(image.detections.size());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const Detection& s = image.detections[static_cast<std::size_t>(i)];
                const Detection& o = image.detections[static_cast<std::size_t>(j)];

                int predicate = geometric_predicate(s.box, o.box);
                if (predicate == 0 && unit(rng) < config.relation_prob) {
                    predicate = (unit(rng) < config.predicate_bias)
                                    ? favored_predicate(s.label, o.label, num_predicates)
                                    : interaction_dist(rng);
                }
                if (predicate > 0) {
                    data.gt.relationships.push_back(
                        {image_id, s.label, s.box, o.label, o.box, predicate});
                }

                // union-box visual feature for the pair; interaction predicates
                // leave an appearance trace, geometric ones are purely positional
                const auto ps = label_prototype(s.label, dim);
                const auto po = label_prototype(o.label, dim);
                std::vector<float> mix(dim);
                for (std::size_t k = 0; k < dim; ++k) mix[k] = 0.5f * (ps[k] + po[k]);
                std::vector<float> extra;
                if (predicate >= kFirstInteractionPredicate) {
                    extra = interaction_prototype(predicate, dim);
                }
                data.features.append_row(noisy_feature(mix, extra.empty() ? nullptr : &extra));
                data.pair_features[{image_id, i, j}] = next_ref++;
            }
        }
        data.detections.emplace(image_id, std::move(image));
    }
    return data;
}

}  // namespace vrd

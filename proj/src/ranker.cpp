#include "vrd/ranker.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vrd {
namespace {

struct RankKey {
    double score;
    int kind;  // 0 relationship, 1 attribute
    int first_index;
    int second_index;
    int cls;
    std::size_t source;  // position in the input list

    bool operator<(const RankKey& other) const {
        if (score != other.score) return score > other.score;
        return std::tie(kind, first_index, second_index, cls) <
               std::tie(other.kind, other.first_index, other.second_index, other.cls);
    }
};

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

}  // namespace

std::vector<std::pair<int, int>> make_proposals(const ImageRecord& image) {
    const int n = static_cast<int>(image.detections.size());
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n > 0 ? static_cast<std::size_t>(n - 1) : 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j) pairs.emplace_back(i, j);
        }
    }
    return pairs;
}

RankedPredictions rank_top_k(std::vector<TripletPrediction> rels,
                             std::vector<AttributePrediction> attrs, std::size_t k) {
    if (k < 1) throw std::invalid_argument("top-k must be >= 1");
    std::vector<RankKey> keys;
    keys.reserve(rels.size() + attrs.size());
    for (std::size_t i = 0; i < rels.size(); ++i) {
        keys.push_back(
            {rels[i].score, 0, rels[i].subject_index, rels[i].object_index, rels[i].predicate, i});
    }
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        keys.push_back({attrs[i].score, 1, attrs[i].object_index, 0, attrs[i].attribute, i});
    }
    std::sort(keys.begin(), keys.end());
    if (keys.size() > k) keys.resize(k);

    RankedPredictions out;
    for (const auto& key : keys) {
        if (key.kind == 0) {
            out.relationships.push_back(rels[key.source]);
        } else {
            out.attributes.push_back(attrs[key.source]);
        }
    }
    return out;
}

RankedPredictions infer_image(const std::string& image_id, const ImageRecord& image,
                              const FeatureStore& features, const PairFeatureTable& pair_features,
                              const FreqTable& freq, const FusionModel* fusion,
                              const AttributeModel* attrs, const InferOptions& options) {
    if (!options.baseline && fusion == nullptr) {
        throw std::invalid_argument("non-baseline inference requires a fusion model");
    }
    FusionModel adjusted;
    const FusionModel* model = fusion;
    if (fusion != nullptr && (options.disable_spatial || options.disable_solo_heads)) {
        adjusted = *fusion;
        if (options.disable_spatial) adjusted.use_spatial = false;
        if (options.disable_solo_heads) adjusted.use_solo_heads = false;
        model = &adjusted;
    }

    const std::size_t k_classes = freq.num_predicates();
    std::vector<TripletPrediction> rels;
    for (const auto& [i, j] : make_proposals(image)) {
        const Detection& s = image.detections[static_cast<std::size_t>(i)];
        const Detection& o = image.detections[static_cast<std::size_t>(j)];
        std::vector<double> probs;
        if (options.baseline) {
            probs = freq.probs(s.label, o.label);
        } else {
            probs = predict_predicate(*model, freq, image_id, image, i, j, features, pair_features);
        }
        // no_relationship (index 0) is never ranked
        std::vector<int> order;
        for (std::size_t p = 1; p < k_classes; ++p) order.push_back(static_cast<int>(p));
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
                return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
            }
            return a < b;
        });
        std::size_t cap = options.per_pair_predicate_cap == 0 ? order.size()
                                                              : options.per_pair_predicate_cap;
        cap = std::min(cap, order.size());
        for (std::size_t r = 0; r < cap; ++r) {
            const int p = order[r];
            TripletPrediction t;
            t.image_id = image_id;
            t.subject_label = s.label;
            t.subject_box = s.box;
            t.object_label = o.label;
            t.object_box = o.box;
            t.predicate = p;
            t.score = score_triplet(s.score, probs[static_cast<std::size_t>(p)], o.score);
            t.subject_index = i;
            t.object_index = j;
            rels.push_back(std::move(t));
        }
    }

    std::vector<AttributePrediction> attr_preds;
    if (attrs != nullptr) {
        for (int i = 0; i < static_cast<int>(image.detections.size()); ++i) {
            const Detection& d = image.detections[static_cast<std::size_t>(i)];
            if (!d.feature_ref) {
                throw std::runtime_error("detection in " + image_id + " has no feature_ref");
            }
            auto row = features.row(*d.feature_ref);
            std::vector<double> v(row.begin(), row.end());
            auto probs = attribute_scores(*attrs, v);
            for (std::size_t a = 1; a < probs.size(); ++a) {
                AttributePrediction p;
                p.image_id = image_id;
                p.object_label = d.label;
                p.object_box = d.box;
                p.attribute = static_cast<int>(a);
                p.score = score_attribute(d.score, probs[a]);
                p.object_index = i;
                attr_preds.push_back(std::move(p));
            }
        }
    }
    return rank_top_k(std::move(rels), std::move(attr_preds), options.top_k);
}

void write_predictions(const std::string& path, const std::vector<RankedPredictions>& per_image,
                       const Vocabulary& objects, const Vocabulary& predicates,
                       const Vocabulary& attributes) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write prediction file: " + path);
    out << std::setprecision(17);
    for (const auto& ranked : per_image) {
        for (const auto& r : ranked.relationships) {
            out << "rel " << r.image_id << ' ' << objects.name(r.subject_label) << ' '
                << r.subject_box.x_min << ' ' << r.subject_box.y_min << ' ' << r.subject_box.x_max
                << ' ' << r.subject_box.y_max << ' ' << objects.name(r.object_label) << ' '
                << r.object_box.x_min << ' ' << r.object_box.y_min << ' ' << r.object_box.x_max
                << ' ' << r.object_box.y_max << ' ' << predicates.name(r.predicate) << ' '
                << r.score << '\n';
        }
        for (const auto& a : ranked.attributes) {
            out << "attr " << a.image_id << ' ' << objects.name(a.object_label) << ' '
                << a.object_box.x_min << ' ' << a.object_box.y_min << ' ' << a.object_box.x_max
                << ' ' << a.object_box.y_max << ' ' << attributes.name(a.attribute - 1) << ' '
                << a.score << '\n';
        }
    }
}

RankedPredictions read_predictions(const std::string& path, const Vocabulary& objects,
                                   const Vocabulary& predicates, const Vocabulary& attributes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prediction file: " + path);
    RankedPredictions out;
    std::string line;
    std::size_t line_no = 0;
    auto read_box = [&](std::istringstream& fields) {
        Box b;
        if (!(fields >> b.x_min >> b.y_min >> b.x_max >> b.y_max)) {
            parse_fail(path, line_no, "malformed box");
        }
        if (!box_valid(b)) parse_fail(path, line_no, "degenerate box");
        return b;
    };
    auto read_label = [&](std::istringstream& fields, const Vocabulary& vocab) {
        std::string name;
        if (!(fields >> name)) parse_fail(path, line_no, "missing label");
        const int idx = vocab.index(name);
        if (idx < 0) parse_fail(path, line_no, "unknown label: " + name);
        return idx;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "rel") {
            TripletPrediction r;
            if (!(fields >> r.image_id)) parse_fail(path, line_no, "missing image_id");
            r.subject_label = read_label(fields, objects);
            r.subject_box = read_box(fields);
            r.object_label = read_label(fields, objects);
            r.object_box = read_box(fields);
            r.predicate = read_label(fields, predicates);
            if (r.predicate == 0) parse_fail(path, line_no, "no_relationship is never ranked");
            if (!(fields >> r.score)) parse_fail(path, line_no, "missing score");
            if (!(r.score >= 0.0 && r.score <= 1.0)) parse_fail(path, line_no, "score outside [0,1]");
            out.relationships.push_back(std::move(r));
        } else if (kind == "attr") {
            AttributePrediction a;
            if (!(fields >> a.image_id)) parse_fail(path, line_no, "missing image_id");
            a.object_label = read_label(fields, objects);
            a.object_box = read_box(fields);
            a.attribute = read_label(fields, attributes) + 1;
            if (!(fields >> a.score)) parse_fail(path, line_no, "missing score");
            if (!(a.score >= 0.0 && a.score <= 1.0)) parse_fail(path, line_no, "score outside [0,1]");
            out.attributes.push_back(std::move(a));
        } else {
            parse_fail(path, line_no, "unknown record kind: " + kind);
        }
    }
    return out;
}

}  // namespace vrd

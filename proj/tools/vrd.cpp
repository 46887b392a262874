// Command-line pipeline: dataset synthesis, frequency-table build, both
// trainers, inference, and evaluation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vrd/attribute.hpp"
#include "vrd/evaluator.hpp"
#include "vrd/freq_table.hpp"
#include "vrd/fusion.hpp"
#include "vrd/ranker.hpp"
#include "vrd/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

// Records what produced an artifact: the subcommand, its config, and a
// digest of every input file.
void write_manifest(const std::string& artifact_path, const std::string& subcommand,
                    const json& config, const std::vector<std::string>& inputs) {
    json manifest;
    manifest["subcommand"] = subcommand;
    manifest["config"] = config;
    json digests = json::object();
    for (const auto& path : inputs) {
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a_digest(path)));
        digests[path] = hex;
    }
    manifest["input_digests"] = digests;
    manifest["timestamp"] = std::chrono::duration_cast<std::chrono::seconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    std::ofstream out(artifact_path + ".manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest for " + artifact_path);
    out << manifest.dump(2) << '\n';
}

struct VocabPaths {
    std::string objects;
    std::string predicates;
    std::string attributes;
};

void add_vocab_flags(CLI::App* cmd, VocabPaths& paths, bool need_attributes = true) {
    cmd->add_option("--vocab-objects", paths.objects, "object vocabulary file")->required();
    cmd->add_option("--vocab-predicates", paths.predicates, "predicate vocabulary file")
        ->required();
    auto* a = cmd->add_option("--vocab-attributes", paths.attributes, "attribute vocabulary file");
    if (need_attributes) a->required();
}

struct DataPaths {
    std::string detections;
    std::string features;
    std::string pair_features;
    std::string gt;
};

vrd::Dataset load_dataset(const DataPaths& paths, const vrd::Vocabulary& objects,
                          const vrd::Vocabulary& predicates, const vrd::Vocabulary& attributes,
                          bool need_pairs) {
    vrd::Dataset data;
    data.detections = vrd::read_detections(paths.detections, objects);
    data.features = vrd::read_features(paths.features);
    if (need_pairs) data.pair_features = vrd::read_pair_features(paths.pair_features);
    if (!paths.gt.empty()) data.gt = vrd::read_gt(paths.gt, objects, predicates, attributes);
    vrd::validate_refs(data.detections, data.pair_features, data.features);
    return data;
}

int run(int argc, char** argv) {
    CLI::App app{"relationship detection pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string out_dir;
    vrd::SynthConfig synth_config;
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", synth_config.seed, "rng seed");
    synth->add_option("--images", synth_config.n_images, "number of images");
    synth->add_option("--objects-per-image", synth_config.n_objects_per_image, "objects per image")
        ->check(CLI::Range(2, 1000));
    synth->add_option("--feature-dim", synth_config.feature_dim, "visual feature dimensionality");
    synth->add_option("--image-prefix", synth_config.image_prefix, "image id prefix");

    // ---- build-freq ----
    auto* build_freq = app.add_subcommand("build-freq", "build the p(P|S,O) frequency table");
    std::string freq_gt_path;
    std::string freq_out;
    double alpha = 0.0;
    VocabPaths freq_vocabs;
    build_freq->add_option("--gt", freq_gt_path, "ground-truth file")->required();
    build_freq->add_option("--out", freq_out, "output table file")->required();
    build_freq->add_option("--alpha", alpha, "additive smoothing")->check(CLI::NonNegativeNumber);
    add_vocab_flags(build_freq, freq_vocabs);

    // ---- train-rel ----
    auto* train_rel = app.add_subcommand("train-rel", "train the relationship fusion model");
    DataPaths rel_paths;
    VocabPaths rel_vocabs;
    std::string rel_freq_path;
    std::string rel_out;
    vrd::TrainConfig rel_config;
    std::size_t spatial_hidden = 64;
    std::size_t visual_hidden = 256;
    bool rel_no_spatial = false;
    bool rel_no_solo = false;
    train_rel->add_option("--detections", rel_paths.detections)->required();
    train_rel->add_option("--features", rel_paths.features)->required();
    train_rel->add_option("--pair-features", rel_paths.pair_features)->required();
    train_rel->add_option("--gt", rel_paths.gt)->required();
    train_rel->add_option("--freq", rel_freq_path, "frequency table file")->required();
    train_rel->add_option("--out", rel_out, "output checkpoint")->required();
    add_vocab_flags(train_rel, rel_vocabs);
    train_rel->add_option("--epochs", rel_config.epochs)->check(CLI::PositiveNumber);
    train_rel->add_option("--neg-pos-ratio", rel_config.neg_pos_ratio);
    train_rel->add_option("--lr", rel_config.learning_rate);
    train_rel->add_option("--momentum", rel_config.momentum);
    train_rel->add_option("--batch", rel_config.batch_size)->check(CLI::PositiveNumber);
    train_rel->add_option("--seed", rel_config.seed);
    train_rel->add_option("--spatial-hidden", spatial_hidden)->check(CLI::PositiveNumber);
    train_rel->add_option("--visual-hidden", visual_hidden)->check(CLI::PositiveNumber);
    train_rel->add_flag("--no-spatial", rel_no_spatial, "train without the spatial branch");
    train_rel->add_flag("--no-solo-heads", rel_no_solo, "train without the subject/object heads");

    // ---- train-attr ----
    auto* train_attr = app.add_subcommand("train-attr", "train the attribute model");
    DataPaths attr_paths;
    VocabPaths attr_vocabs;
    std::string attr_out;
    vrd::TrainConfig attr_config;
    attr_config.neg_pos_ratio = 1.0;
    std::size_t attr_hidden = 64;
    train_attr->add_option("--detections", attr_paths.detections)->required();
    train_attr->add_option("--features", attr_paths.features)->required();
    train_attr->add_option("--gt", attr_paths.gt)->required();
    train_attr->add_option("--out", attr_out, "output checkpoint")->required();
    add_vocab_flags(train_attr, attr_vocabs);
    train_attr->add_option("--epochs", attr_config.epochs)->check(CLI::PositiveNumber);
    train_attr->add_option("--neg-pos-ratio", attr_config.neg_pos_ratio);
    train_attr->add_option("--lr", attr_config.learning_rate);
    train_attr->add_option("--momentum", attr_config.momentum);
    train_attr->add_option("--batch", attr_config.batch_size)->check(CLI::PositiveNumber);
    train_attr->add_option("--seed", attr_config.seed);
    train_attr->add_option("--hidden", attr_hidden)->check(CLI::PositiveNumber);

    // ---- infer ----
    auto* infer = app.add_subcommand("infer", "score and rank all proposals");
    DataPaths infer_paths;
    VocabPaths infer_vocabs;
    std::string infer_freq_path;
    std::string infer_rel_model;
    std::string infer_attr_model;
    std::string infer_out;
    vrd::InferOptions infer_options;
    infer->add_option("--detections", infer_paths.detections)->required();
    infer->add_option("--features", infer_paths.features)->required();
    infer->add_option("--pair-features", infer_paths.pair_features)->required();
    infer->add_option("--freq", infer_freq_path, "frequency table file")->required();
    infer->add_option("--rel-model", infer_rel_model, "fusion model checkpoint");
    infer->add_option("--attr-model", infer_attr_model, "attribute model checkpoint");
    infer->add_option("--out", infer_out, "output prediction file")->required();
    add_vocab_flags(infer, infer_vocabs);
    infer->add_option("--top-k", infer_options.top_k)->check(CLI::PositiveNumber);
    infer->add_option("--pair-cap", infer_options.per_pair_predicate_cap,
                      "max predicates per pair (0 = all)");
    infer->add_flag("--baseline", infer_options.baseline,
                    "rank with the frequency table alone as S_P");
    infer->add_flag("--no-spatial", infer_options.disable_spatial);
    infer->add_flag("--no-solo-heads", infer_options.disable_solo_heads);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
    std::string eval_preds;
    std::string eval_gt;
    std::string eval_out;
    VocabPaths eval_vocabs;
    vrd::EvalOptions eval_options;
    eval->add_option("--preds", eval_preds, "prediction file")->required();
    eval->add_option("--gt", eval_gt, "ground-truth file")->required();
    eval->add_option("--out", eval_out, "output report file")->required();
    add_vocab_flags(eval, eval_vocabs);
    eval->add_option("--iou-threshold", eval_options.iou_threshold)
        ->check(CLI::Range(0.0, 1.0));
    eval->add_option("--recall-k", eval_options.recall_k)->check(CLI::PositiveNumber);
    eval->add_flag("--macro-recall", eval_options.macro_recall,
                   "per-image mean recall instead of dataset pooling");

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        fs::create_directories(out_dir);
        const vrd::Dataset data = vrd::synth_world(synth_config);
        const auto objects = vrd::synth_object_vocab();
        const auto predicates = vrd::synth_predicate_vocab();
        const auto attributes = vrd::synth_attribute_vocab();
        vrd::write_vocabulary(out_dir + "/objects.txt", objects);
        vrd::write_vocabulary(out_dir + "/predicates.txt", predicates);
        vrd::write_vocabulary(out_dir + "/attributes.txt", attributes);
        vrd::write_detections(out_dir + "/detections.txt", data.detections, objects);
        vrd::write_features(out_dir + "/features.bin", data.features);
        vrd::write_pair_features(out_dir + "/pair_features.txt", data.pair_features);
        vrd::write_gt(out_dir + "/gt.txt", data.gt, objects, predicates, attributes);
        json config{{"seed", synth_config.seed},
                    {"images", synth_config.n_images},
                    {"objects_per_image", synth_config.n_objects_per_image},
                    {"feature_dim", synth_config.feature_dim}};
        write_manifest(out_dir + "/dataset", "synth", config, {});
        std::cout << "wrote synthetic dataset to " << out_dir << " (" << data.detections.size()
                  << " images, " << data.gt.relationships.size() << " relationships, "
                  << data.gt.attributes.size() << " attributes)\n";
    } else if (build_freq->parsed()) {
        const auto objects = vrd::read_vocabulary(freq_vocabs.objects, vrd::VocabKind::Object);
        const auto predicates =
            vrd::read_vocabulary(freq_vocabs.predicates, vrd::VocabKind::Predicate);
        const auto attributes =
            vrd::read_vocabulary(freq_vocabs.attributes, vrd::VocabKind::Attribute);
        const auto gt = vrd::read_gt(freq_gt_path, objects, predicates, attributes);
        const auto table = vrd::build_freq_table(gt.relationships, predicates, alpha);
        vrd::write_freq_table(freq_out, table);
        write_manifest(freq_out, "build-freq", json{{"alpha", alpha}},
                       {freq_gt_path, freq_vocabs.objects, freq_vocabs.predicates});
        std::cout << "wrote frequency table with " << table.counts().size() << " keys to "
                  << freq_out << '\n';
    } else if (train_rel->parsed()) {
        const auto objects = vrd::read_vocabulary(rel_vocabs.objects, vrd::VocabKind::Object);
        const auto predicates =
            vrd::read_vocabulary(rel_vocabs.predicates, vrd::VocabKind::Predicate);
        const auto attributes =
            vrd::read_vocabulary(rel_vocabs.attributes, vrd::VocabKind::Attribute);
        const auto data = load_dataset(rel_paths, objects, predicates, attributes, true);
        const auto freq = vrd::read_freq_table(rel_freq_path);
        auto model = vrd::init_fusion_model(predicates.size(), data.features.dim(), spatial_hidden,
                                            visual_hidden, rel_config.seed);
        model.use_spatial = !rel_no_spatial;
        model.use_solo_heads = !rel_no_solo;
        const auto trace = vrd::train_fusion(model, data, freq, rel_config);
        vrd::save_fusion_model(rel_out, model);
        json config{{"epochs", rel_config.epochs},
                    {"neg_pos_ratio", rel_config.neg_pos_ratio},
                    {"lr", rel_config.learning_rate},
                    {"momentum", rel_config.momentum},
                    {"batch", rel_config.batch_size},
                    {"seed", rel_config.seed},
                    {"no_spatial", rel_no_spatial},
                    {"no_solo_heads", rel_no_solo},
                    {"loss_trace", trace}};
        write_manifest(rel_out, "train-rel", config,
                       {rel_paths.detections, rel_paths.features, rel_paths.pair_features,
                        rel_paths.gt, rel_freq_path});
        std::cout << "trained relationship model: loss " << trace.front() << " -> " << trace.back()
                  << " over " << trace.size() << " epochs\n";
    } else if (train_attr->parsed()) {
        const auto objects = vrd::read_vocabulary(attr_vocabs.objects, vrd::VocabKind::Object);
        const auto predicates =
            vrd::read_vocabulary(attr_vocabs.predicates, vrd::VocabKind::Predicate);
        const auto attributes =
            vrd::read_vocabulary(attr_vocabs.attributes, vrd::VocabKind::Attribute);
        attr_paths.pair_features.clear();
        const auto data = load_dataset(attr_paths, objects, predicates, attributes, false);
        auto model = vrd::init_attribute_model(attributes.size(), data.features.dim(), attr_hidden,
                                               attr_config.seed);
        const auto trace = vrd::train_attributes(model, data, attr_config);
        vrd::save_attribute_model(attr_out, model);
        json config{{"epochs", attr_config.epochs},
                    {"neg_pos_ratio", attr_config.neg_pos_ratio},
                    {"lr", attr_config.learning_rate},
                    {"momentum", attr_config.momentum},
                    {"batch", attr_config.batch_size},
                    {"seed", attr_config.seed},
                    {"loss_trace", trace}};
        write_manifest(attr_out, "train-attr", config,
                       {attr_paths.detections, attr_paths.features, attr_paths.gt});
        std::cout << "trained attribute model: loss " << trace.front() << " -> " << trace.back()
                  << " over " << trace.size() << " epochs\n";
    } else if (infer->parsed()) {
        const auto objects = vrd::read_vocabulary(infer_vocabs.objects, vrd::VocabKind::Object);
        const auto predicates =
            vrd::read_vocabulary(infer_vocabs.predicates, vrd::VocabKind::Predicate);
        const auto attributes =
            vrd::read_vocabulary(infer_vocabs.attributes, vrd::VocabKind::Attribute);
        const auto data = load_dataset(infer_paths, objects, predicates, attributes, true);
        const auto freq = vrd::read_freq_table(infer_freq_path);
        if (freq.num_predicates() != predicates.size()) {
            throw std::runtime_error("frequency table predicate count does not match vocabulary");
        }
        vrd::FusionModel fusion;
        const vrd::FusionModel* fusion_ptr = nullptr;
        if (!infer_rel_model.empty()) {
            fusion = vrd::load_fusion_model(infer_rel_model);
            fusion_ptr = &fusion;
        }
        vrd::AttributeModel attr_model;
        const vrd::AttributeModel* attr_ptr = nullptr;
        if (!infer_attr_model.empty()) {
            attr_model = vrd::load_attribute_model(infer_attr_model);
            attr_ptr = &attr_model;
        }
        std::vector<vrd::RankedPredictions> per_image;
        for (const auto& [image_id, image] : data.detections) {
            per_image.push_back(vrd::infer_image(image_id, image, data.features,
                                                 data.pair_features, freq, fusion_ptr, attr_ptr,
                                                 infer_options));
        }
        vrd::write_predictions(infer_out, per_image, objects, predicates, attributes);
        std::vector<std::string> inputs{infer_paths.detections, infer_paths.features,
                                        infer_paths.pair_features, infer_freq_path};
        if (!infer_rel_model.empty()) inputs.push_back(infer_rel_model);
        if (!infer_attr_model.empty()) inputs.push_back(infer_attr_model);
        json config{{"top_k", infer_options.top_k},
                    {"pair_cap", infer_options.per_pair_predicate_cap},
                    {"baseline", infer_options.baseline},
                    {"no_spatial", infer_options.disable_spatial},
                    {"no_solo_heads", infer_options.disable_solo_heads}};
        write_manifest(infer_out, "infer", config, inputs);
        std::cout << "wrote predictions for " << per_image.size() << " images to " << infer_out
                  << '\n';
    } else if (eval->parsed()) {
        const auto objects = vrd::read_vocabulary(eval_vocabs.objects, vrd::VocabKind::Object);
        const auto predicates =
            vrd::read_vocabulary(eval_vocabs.predicates, vrd::VocabKind::Predicate);
        const auto attributes =
            vrd::read_vocabulary(eval_vocabs.attributes, vrd::VocabKind::Attribute);
        const auto preds = vrd::read_predictions(eval_preds, objects, predicates, attributes);
        const auto gt = vrd::read_gt(eval_gt, objects, predicates, attributes);
        const auto report = vrd::evaluate(preds, gt, predicates, attributes, eval_options);
        vrd::write_report(eval_out, report);
        json config{{"iou_threshold", eval_options.iou_threshold},
                    {"recall_k", eval_options.recall_k},
                    {"macro_recall", eval_options.macro_recall}};
        write_manifest(eval_out, "eval", config, {eval_preds, eval_gt});
        std::cout << vrd::format_report(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

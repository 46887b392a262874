#pragma once

#include <cstdint>
#include <string>

#include "vrd/data_io.hpp"

namespace vrd {

// Desk-scale synthetic world. Ground-truth predicates mix geometry rules
// (above / below / inside_of, driven purely by box layout) with a label
// co-occurrence bias over the interaction predicates; visual features are
// noisy label prototypes, with an attribute prototype mixed in for
// attribute-bearing objects.
struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t n_images = 100;
    std::size_t n_objects_per_image = 4;
    std::size_t feature_dim = 64;
    double relation_prob = 0.6;    // chance a non-geometric pair is related
    double predicate_bias = 0.8;   // favored-predicate probability for biased pairs
    double attribute_prob = 0.6;   // chance an object carries an attribute
    double feature_noise = 0.4;
    std::string image_prefix = "img";
};

Vocabulary synth_object_vocab();
Vocabulary synth_predicate_vocab();
Vocabulary synth_attribute_vocab();

// First interaction predicate index; 1..3 are the geometry-ruled classes.
inline constexpr int kFirstInteractionPredicate = 4;

// Deterministic label-pair bias target, independent of the world seed.
int favored_predicate(int subject_label, int object_label, std::size_t num_predicates);
int favored_attribute(int label, std::size_t num_attributes);

// Geometry rules applied to a candidate pair; returns 0 when no rule fires.
int geometric_predicate(const Box& subject, const Box& object);

// Pure function of its config: same config, byte-identical dataset.
Dataset synth_world(const SynthConfig& config);

}  // namespace vrd

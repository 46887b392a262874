#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vrd/data_io.hpp"

namespace vrd {

// Empirical predicate distribution p(P|S,O) counted from ground-truth
// triples. Index 0 (no_relationship) never receives counts; it gains
// probability only through additive smoothing.
class FreqTable {
public:
    FreqTable() = default;
    FreqTable(std::size_t num_predicates, double alpha);

    void add(int subject_label, int object_label, int predicate, std::uint64_t n = 1);

    std::size_t num_predicates() const { return num_predicates_; }
    double alpha() const { return alpha_; }
    bool has_key(int subject_label, int object_label) const;

    // Smoothed probabilities; uniform 1/K for unseen (s,o) keys.
    std::vector<double> probs(int subject_label, int object_label) const;
    // log(max(p, eps)) per class, eps = 1e-8; log(1/K) for unseen keys.
    std::vector<double> logits(int subject_label, int object_label) const;
    // Argmax predicate (ties toward the lowest index) plus the full distribution.
    std::pair<int, std::vector<double>> predict(int subject_label, int object_label) const;

    const std::map<std::pair<int, int>, std::vector<std::uint64_t>>& counts() const {
        return counts_;
    }

    static constexpr double kLogEps = 1e-8;

private:
    std::size_t num_predicates_ = 0;
    double alpha_ = 0.0;
    std::map<std::pair<int, int>, std::vector<std::uint64_t>> counts_;
};

FreqTable build_freq_table(const std::vector<GtRelationship>& gt, const Vocabulary& predicates,
                           double alpha);

FreqTable read_freq_table(const std::string& path);
void write_freq_table(const std::string& path, const FreqTable& table);

}  // namespace vrd

#include "vrd/freq_table.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vrd {

FreqTable::FreqTable(std::size_t num_predicates, double alpha)
    : num_predicates_(num_predicates), alpha_(alpha) {
    if (num_predicates_ < 2) throw std::invalid_argument("need at least 2 predicate classes");
    if (alpha_ < 0.0) throw std::invalid_argument("smoothing alpha must be nonnegative");
}

void FreqTable::add(int subject_label, int object_label, int predicate, std::uint64_t n) {
    if (predicate < 1 || static_cast<std::size_t>(predicate) >= num_predicates_) {
        throw std::invalid_argument("predicate index out of range: " + std::to_string(predicate));
    }
    auto& row = counts_[{subject_label, object_label}];
    if (row.empty()) row.assign(num_predicates_, 0);
    row[static_cast<std::size_t>(predicate)] += n;
}

bool FreqTable::has_key(int subject_label, int object_label) const {
    return counts_.contains({subject_label, object_label});
}

std::vector<double> FreqTable::probs(int subject_label, int object_label) const {
    const std::size_t k = num_predicates_;
    auto it = counts_.find({subject_label, object_label});
    if (it == counts_.end()) {
        return std::vector<double>(k, 1.0 / static_cast<double>(k));
    }
    const auto& row = it->second;
    std::uint64_t total = 0;
    for (auto c : row) total += c;
    const double denom = static_cast<double>(total) + alpha_ * static_cast<double>(k);
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = (static_cast<double>(row[i]) + alpha_) / denom;
    }
    return p;
}

std::vector<double> FreqTable::logits(int subject_label, int object_label) const {
    auto p = probs(subject_label, object_label);
    for (auto& v : p) v = std::log(std::max(v, kLogEps));
    return p;
}

std::pair<int, std::vector<double>> FreqTable::predict(int subject_label, int object_label) const {
    auto p = probs(subject_label, object_label);
    // no_relationship is never predicted as the baseline argmax
    int best = 1;
    for (std::size_t i = 2; i < p.size(); ++i) {
        if (p[i] > p[best]) best = static_cast<int>(i);
    }
    return {best, std::move(p)};
}

FreqTable build_freq_table(const std::vector<GtRelationship>& gt, const Vocabulary& predicates,
                           double alpha) {
    FreqTable table(predicates.size(), alpha);
    for (const auto& r : gt) {
        table.add(r.subject_label, r.object_label, r.predicate);
    }
    return table;
}

FreqTable read_freq_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open frequency table: " + path);
    std::string header;
    double alpha = 0.0;
    std::size_t k = 0;
    in >> header >> alpha >> k;
    if (!in || header != "VRDFREQ1") throw std::runtime_error(path + ": bad frequency table header");
    FreqTable table(k, alpha);
    int s = 0;
    int o = 0;
    while (in >> s >> o) {
        std::vector<std::uint64_t> row(k);
        for (auto& c : row) {
            if (!(in >> c)) throw std::runtime_error(path + ": truncated count row");
        }
        if (row[0] != 0) throw std::runtime_error(path + ": nonzero no_relationship count");
        for (std::size_t p = 1; p < k; ++p) {
            if (row[p] > 0) table.add(s, o, static_cast<int>(p), row[p]);
        }
    }
    return table;
}

void write_freq_table(const std::string& path, const FreqTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write frequency table: " + path);
    std::ostringstream alpha;
    alpha.precision(17);
    alpha << table.alpha();
    out << "VRDFREQ1 " << alpha.str() << ' ' << table.num_predicates() << '\n';
    for (const auto& [key, row] : table.counts()) {
        out << key.first << ' ' << key.second;
        for (auto c : row) out << ' ' << c;
        out << '\n';
    }
}

}  // namespace vrd

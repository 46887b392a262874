#include "vrd/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace vrd {

Vocabulary::Vocabulary(VocabKind kind, std::vector<std::string> names)
    : kind_(kind), names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i].empty()) throw std::invalid_argument("empty vocabulary entry");
        auto [it, inserted] = by_name_.emplace(names_[i], static_cast<int>(i));
        if (!inserted) throw std::invalid_argument("duplicate vocabulary entry: " + names_[i]);
    }
    if (kind_ == VocabKind::Predicate) {
        if (names_.empty() || names_[0] != kNoRelationship) {
            throw std::invalid_argument(
                "predicate vocabulary must reserve index 0 for no_relationship");
        }
    }
}

const std::string& Vocabulary::name(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= names_.size()) {
        throw std::out_of_range("vocabulary index out of range: " + std::to_string(index));
    }
    return names_[static_cast<std::size_t>(index)];
}

int Vocabulary::index(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

Vocabulary read_vocabulary(const std::string& path, VocabKind kind) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        names.push_back(line);
    }
    return Vocabulary(kind, std::move(names));
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const auto& n : vocab.names()) out << n << '\n';
}

}  // namespace vrd

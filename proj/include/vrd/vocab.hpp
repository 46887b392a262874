#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace vrd {

enum class VocabKind { Object, Predicate, Attribute };

// Ordered label space; index equals file line number. The predicate
// vocabulary reserves index 0 for "no_relationship".
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(VocabKind kind, std::vector<std::string> names);

    VocabKind kind() const { return kind_; }
    std::size_t size() const { return names_.size(); }
    const std::string& name(int index) const;
    int index(const std::string& name) const;  // -1 when unknown
    const std::vector<std::string>& names() const { return names_; }

    static constexpr const char* kNoRelationship = "no_relationship";

private:
    VocabKind kind_ = VocabKind::Object;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> by_name_;
};

Vocabulary read_vocabulary(const std::string& path, VocabKind kind);
void write_vocabulary(const std::string& path, const Vocabulary& vocab);

}  // namespace vrd

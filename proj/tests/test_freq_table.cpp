#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "vrd/freq_table.hpp"

using namespace vrd;

namespace {

const Vocabulary kPredicates(VocabKind::Predicate,
                             {"no_relationship", "ride", "feed", "p3", "p4", "p5", "p6", "p7",
                              "p8", "p9"});  // K = 10

GtRelationship triple(int s, int p, int o) {
    return GtRelationship{"im", s, {0, 0, 1, 1}, o, {2, 2, 3, 3}, p};
}

// independent brute-force recount used as the oracle
std::vector<double> recount_probs(const std::vector<GtRelationship>& gt, int s, int o,
                                  std::size_t k, double alpha) {
    std::vector<double> counts(k, 0.0);
    double total = 0.0;
    for (const auto& r : gt) {
        if (r.subject_label == s && r.object_label == o) {
            counts[static_cast<std::size_t>(r.predicate)] += 1.0;
            total += 1.0;
        }
    }
    std::vector<double> p(k);
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = (counts[i] + alpha) / (total + alpha * static_cast<double>(k));
    }
    return p;
}

}  // namespace

TEST_CASE("hand-counted distribution") {
    // ride=1, feed=2
    std::vector<GtRelationship> gt = {triple(0, 1, 1), triple(0, 1, 1), triple(0, 1, 1),
                                      triple(0, 2, 1)};
    auto table = build_freq_table(gt, kPredicates, 0.0);
    auto p = table.probs(0, 1);
    CHECK(p[1] == doctest::Approx(0.75));
    CHECK(p[2] == doctest::Approx(0.25));
    CHECK(p[0] == 0.0);
    CHECK(table.predict(0, 1).first == 1);
}

TEST_CASE("single triple gives probability one") {
    auto table = build_freq_table({triple(3, 5, 4)}, kPredicates, 0.0);
    CHECK(table.probs(3, 4)[5] == 1.0);
}

TEST_CASE("empty GT falls back to uniform") {
    auto table = build_freq_table({}, kPredicates, 0.0);
    CHECK(table.counts().empty());
    auto p = table.probs(0, 1);
    for (double v : p) CHECK(v == doctest::Approx(0.1));
    auto l = table.logits(0, 1);
    for (double v : l) CHECK(v == doctest::Approx(std::log(0.1)));
    CHECK(table.predict(0, 1).first == 1);  // tie toward the lowest predicate index
}

TEST_CASE("laplace smoothing arithmetic") {
    std::vector<GtRelationship> gt = {triple(0, 1, 1), triple(0, 1, 1), triple(0, 1, 1),
                                      triple(0, 2, 1)};
    auto table = build_freq_table(gt, kPredicates, 1.0);
    CHECK(table.probs(0, 1)[1] == doctest::Approx(4.0 / 14.0));
    CHECK(table.probs(0, 1)[0] == doctest::Approx(1.0 / 14.0));
}

TEST_CASE("zero-probability classes get the logit floor") {
    auto table = build_freq_table({triple(0, 1, 1), triple(0, 1, 1), triple(0, 1, 1),
                                   triple(0, 2, 1)},
                                  kPredicates, 0.0);
    auto l = table.logits(0, 1);
    CHECK(l[1] == doctest::Approx(std::log(0.75)));
    CHECK(l[2] == doctest::Approx(std::log(0.25)));
    CHECK(l[3] == doctest::Approx(std::log(1e-8)));
    for (double v : l) CHECK(std::isfinite(v));
}

TEST_CASE("argmax flips after recount") {
    std::vector<GtRelationship> gt;
    for (int i = 0; i < 3; ++i) gt.push_back(triple(0, 1, 1));  // ride x3
    for (int i = 0; i < 4; ++i) gt.push_back(triple(0, 2, 1));  // feed x4
    auto table = build_freq_table(gt, kPredicates, 0.0);
    CHECK(table.predict(0, 1).first == 2);
    CHECK(table.probs(0, 1)[2] == doctest::Approx(4.0 / 7.0));
}

TEST_CASE("brute-force recount oracle on random GT sets") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> label(0, 5);
    std::uniform_int_distribution<int> predicate(1, 9);
    std::uniform_int_distribution<int> count(1, 1000);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<GtRelationship> gt;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) gt.push_back(triple(label(rng), predicate(rng), label(rng)));
        const double alpha = (trial % 2 == 0) ? 0.0 : 1.0;
        auto table = build_freq_table(gt, kPredicates, alpha);
        for (const auto& [key, row] : table.counts()) {
            auto expected = recount_probs(gt, key.first, key.second, kPredicates.size(), alpha);
            auto got = table.probs(key.first, key.second);
            double sum = 0.0;
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
                sum += got[i];
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
            CHECK(row[0] == 0);
        }
    }
}

TEST_CASE("order independence") {
    std::mt19937_64 rng(22);
    std::vector<GtRelationship> gt;
    std::uniform_int_distribution<int> label(0, 4);
    std::uniform_int_distribution<int> predicate(1, 9);
    for (int i = 0; i < 500; ++i) gt.push_back(triple(label(rng), predicate(rng), label(rng)));
    auto table_a = build_freq_table(gt, kPredicates, 1.0);
    std::shuffle(gt.begin(), gt.end(), rng);
    auto table_b = build_freq_table(gt, kPredicates, 1.0);
    CHECK(table_a.counts() == table_b.counts());
}

TEST_CASE("monotonicity in counts") {
    std::vector<GtRelationship> gt = {triple(0, 1, 1), triple(0, 2, 1), triple(0, 2, 1)};
    auto before = build_freq_table(gt, kPredicates, 0.0).probs(0, 1)[1];
    gt.push_back(triple(0, 1, 1));
    auto after = build_freq_table(gt, kPredicates, 0.0).probs(0, 1)[1];
    CHECK(after >= before);
}

TEST_CASE("serialization round trip") {
    std::vector<GtRelationship> gt = {triple(0, 1, 1), triple(0, 2, 1), triple(3, 7, 2)};
    auto table = build_freq_table(gt, kPredicates, 0.5);
    const auto path = (std::filesystem::temp_directory_path() /
                       ("vrd_freq_" + std::to_string(::getpid()) + ".txt"))
                          .string();
    write_freq_table(path, table);
    auto back = read_freq_table(path);
    CHECK(back.alpha() == table.alpha());
    CHECK(back.num_predicates() == table.num_predicates());
    CHECK(back.counts() == table.counts());
    std::filesystem::remove(path);
}

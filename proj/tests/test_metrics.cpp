#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "trajcap/metrics.hpp"
#include "trajcap/tensor.hpp"

#include <string>
#include <vector>

using namespace trajcap;
using namespace trajcap::metrics;

namespace {

std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

using CandMap = std::map<std::string, std::vector<std::string>>;
using RefMap = std::map<std::string, std::vector<std::vector<std::string>>>;

}  // namespace

TEST_CASE("perfect and disjoint corpora hit the extremes") {
    CandMap cands{{"v1", words("a man rides a horse")}, {"v2", words("the dog runs very fast")}};
    RefMap refs{{"v1", {words("a man rides a horse")}}, {"v2", {words("the dog runs very fast")}}};
    EvalReport perfect = bleu4(cands, refs);
    CHECK(perfect.bleu4 == doctest::Approx(1.0));
    CHECK(perfect.brevity_penalty == doctest::Approx(1.0));
    CHECK(perfect.n_videos == 2);

    RefMap disjoint{{"v1", {words("birds fly south in winter")}},
                    {"v2", {words("children play chess quietly indoors")}}};
    CHECK(bleu4(cands, disjoint).bleu4 == 0.0);
}

TEST_CASE("clipped precisions match a hand n-gram count") {
    CandMap cands{{"v", words("the cat sat on the mat")}};
    RefMap refs{{"v", {words("the cat is on the mat")}}};
    EvalReport r = bleu4(cands, refs);
    // Unigrams: the(2) cat on mat clip to 5 of 6; "sat" misses. Bigrams:
    // the-cat, on-the, the-mat = 3 of 5. Trigrams: on-the-mat = 1 of 4.
    // No 4-gram overlaps, so the unsmoothed score collapses to 0.
    CHECK(r.matched == std::array<long long, 4>{5, 3, 1, 0});
    CHECK(r.total == std::array<long long, 4>{6, 5, 4, 3});
    CHECK(r.precisions[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(r.precisions[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.precisions[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.precisions[3] == 0.0);
    CHECK(r.brevity_penalty == doctest::Approx(1.0));
    CHECK(r.bleu4 == 0.0);
}

TEST_CASE("two-video corpus reproduces the frozen reference score") {
    CandMap cands{{"v1", words("the cat sat on the mat today")},
                  {"v2", words("a dog runs fast")}};
    RefMap refs{{"v1", {words("the cat sat on the red mat today")}},
                {"v2", {words("a dog runs fast"), words("a hound runs quickly")}}};
    EvalReport r = bleu4(cands, refs);
    CHECK(r.matched == std::array<long long, 4>{11, 8, 5, 3});
    CHECK(r.total == std::array<long long, 4>{11, 9, 7, 5});
    CHECK(r.candidate_length == 11);
    CHECK(r.reference_length == 12);
    CHECK(r.brevity_penalty == doctest::Approx(0.91310071628226241).epsilon(1e-15));
    CHECK(r.bleu4 == doctest::Approx(0.71735867820685051).epsilon(1e-15));
}

TEST_CASE("brevity penalty uses the closest reference length, ties to shorter") {
    CandMap cands{{"v", words("w w w w")}};
    // Lengths 3 and 5 are equally close to 4; the shorter one wins, and a
    // candidate at least as long as its reference pays no penalty.
    RefMap refs{{"v", {words("w w w w w"), words("w w w")}}};
    EvalReport r = bleu4(cands, refs);
    CHECK(r.reference_length == 3);
    CHECK(r.brevity_penalty == doctest::Approx(1.0));

    RefMap longer{{"v", {words("w w w w w w w w")}}};
    EvalReport penalized = bleu4(cands, longer);
    CHECK(penalized.reference_length == 8);
    CHECK(penalized.brevity_penalty == doctest::Approx(std::exp(1.0 - 8.0 / 4.0)).epsilon(1e-15));
}

TEST_CASE("video order is irrelevant and extra references never hurt") {
    Rng rng(404);
    const std::vector<std::string> alphabet{"a", "b", "c", "d"};
    auto random_sentence = [&](int min_len, int max_len) {
        int len = min_len + rng.uniform_int(max_len - min_len + 1);
        std::vector<std::string> s;
        for (int i = 0; i < len; ++i)
            s.push_back(alphabet[static_cast<std::size_t>(rng.uniform_int(4))]);
        return s;
    };

    for (int trial = 0; trial < 50; ++trial) {
        CandMap cands;
        RefMap refs;
        int n_videos = 2 + rng.uniform_int(3);
        for (int v = 0; v < n_videos; ++v) {
            std::string id = "v" + std::to_string(v);
            cands[id] = random_sentence(4, 8);
            int n_refs = 1 + rng.uniform_int(2);
            for (int k = 0; k < n_refs; ++k) refs[id].push_back(random_sentence(4, 8));
        }
        EvalReport base = bleu4(cands, refs);
        CHECK(base.bleu4 >= 0.0);
        CHECK(base.bleu4 <= 1.0);

        // std::map already iterates in key order, so permutation invariance
        // reduces to insertion order; build the same corpus reversed.
        CandMap reversed_cands(cands.rbegin(), cands.rend());
        EvalReport permuted = bleu4(reversed_cands, refs);
        CHECK(permuted.bleu4 == base.bleu4);
        CHECK(permuted.matched == base.matched);

        RefMap extended = refs;
        extended["v0"].push_back(random_sentence(4, 8));
        EvalReport extra = bleu4(cands, extended);
        for (int n = 0; n < 4; ++n) CHECK(extra.matched[n] >= base.matched[n]);
    }
}

TEST_CASE("missing references and empty corpora") {
    CandMap cands{{"v1", words("a b c d")}};
    CHECK_THROWS_AS(bleu4(cands, {}), std::invalid_argument);
    CHECK_THROWS_AS(bleu4(cands, RefMap{{"v1", {}}}), std::invalid_argument);
    CHECK_THROWS_AS(bleu4(cands, RefMap{{"other", {words("a b c d")}}}), std::invalid_argument);

    EvalReport empty = bleu4({}, {});
    CHECK(empty.bleu4 == 0.0);
    CHECK(empty.n_videos == 0);

    // An empty candidate sentence scores zero rather than dividing by zero.
    EvalReport hollow = bleu4(CandMap{{"v", {}}}, RefMap{{"v", {words("a b")}}});
    CHECK(hollow.bleu4 == 0.0);
    CHECK(hollow.brevity_penalty == 0.0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "kge/core.hpp"
#include "support/oracles.hpp"

using namespace kge;

namespace {

TripleSet load(const std::string& text, Vocabulary& vocab, LoadOptions opt = {}) {
    std::istringstream in(text);
    return load_triples(in, vocab, opt);
}

}  // namespace

TEST_CASE("load_triples assigns indices in first-encounter order") {
    Vocabulary v;
    auto set = load("a\tr\tb\na\tr\tc\nd\tr\tb\n", v);
    CHECK(set.size() == 3);
    CHECK(v.entity_count() == 4);
    CHECK(v.relation_count() == 1);
    CHECK(v.entity_name(0) == "a");
    CHECK(v.entity_name(1) == "b");
    CHECK(v.entity_name(2) == "c");
    CHECK(v.entity_name(3) == "d");
    CHECK(set.triples[2] == Triple{3, 0, 1});
    CHECK_FALSE(set.labeled());
}

TEST_CASE("empty stream leaves vocabulary untouched") {
    Vocabulary v;
    load("x\tr\ty\n", v);
    auto set = load("", v);
    CHECK(set.size() == 0);
    CHECK(v.entity_count() == 2);
    CHECK(v.relation_count() == 1);
}

TEST_CASE("blank lines and CRLF endings are tolerated") {
    Vocabulary v;
    auto set = load("a\tr\tb\r\n\n\nb\tr\ta\r\n", v);
    CHECK(set.size() == 2);
    CHECK(v.entity_name(1) == "b");
}

TEST_CASE("malformed lines report their line number") {
    Vocabulary v;
    try {
        load("a\tr\tb\na\tr\n", v);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load("a\tr\tb\tc\n", v), ParseError);
    CHECK_THROWS_AS(load("a\t\tb\n", v), ParseError);
}

TEST_CASE("labeled files") {
    Vocabulary v;
    auto set = load("a\tr\tb\t1\nb\tr\ta\t-1\n", v, {Split::valid, true, VocabPolicy::extend});
    REQUIRE(set.labeled());
    CHECK(set.labels->size() == 2);
    CHECK((*set.labels)[0]);
    CHECK_FALSE((*set.labels)[1]);

    SUBCASE("missing label") {
        try {
            load("a\tr\tb\t1\na\tr\tb\n", v, {Split::valid, true, VocabPolicy::extend});
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("label") != std::string::npos);
        }
    }
    SUBCASE("bad label value") { CHECK_THROWS_AS(load("a\tr\tb\t0\n", v, {Split::valid, true, VocabPolicy::extend}), ParseError); }
}

TEST_CASE("frozen vocabulary rejects unseen names") {
    Vocabulary v;
    load("a\tr\tb\n", v);
    CHECK_NOTHROW(load("b\tr\ta\n", v, {Split::test, false, VocabPolicy::frozen}));
    try {
        load("a\tr\tzeta\n", v, {Split::test, false, VocabPolicy::frozen});
        FAIL("expected UnknownNameError");
    } catch (const UnknownNameError& e) {
        CHECK(std::string(e.what()).find("zeta") != std::string::npos);
    }
    CHECK_THROWS_AS(load("a\tq\tb\n", v, {Split::test, false, VocabPolicy::frozen}), UnknownNameError);
    CHECK(v.entity_count() == 2);
}

TEST_CASE("vocabulary round trip on random names") {
    std::mt19937_64 rng(7);
    Vocabulary v;
    std::vector<std::string> names;
    for (int i = 0; i < 500; ++i) names.push_back("e" + std::to_string(rng() % 300));
    for (const auto& n : names) v.add_entity(n);
    for (const auto& n : names) {
        auto id = v.find_entity(n);
        REQUIRE(id);
        CHECK(v.entity_name(*id) == n);
    }
    for (index_t i = 0; i < v.entity_count(); ++i) CHECK(*v.find_entity(v.entity_name(i)) == i);
    CHECK_THROWS_AS(Vocabulary::from_names({"a", "a"}, {"r"}), std::invalid_argument);
}

TEST_CASE("relation statistics on hand-enumerated graphs") {
    Vocabulary v;
    SUBCASE("N-N at cutoff 1.5") {
        auto set = load("a\tr\tb\na\tr\tc\nd\tr\tb\n", v);
        auto s = compute_relation_stats(set, v.relation_count());
        CHECK(s.at(0).tph == doctest::Approx(1.5));
        CHECK(s.at(0).hpt == doctest::Approx(1.5));
        CHECK(s.at(0).category == RelationCategory::many_to_many);
    }
    SUBCASE("single triple is 1-1") {
        auto set = load("a\tr\tb\n", v);
        auto s = compute_relation_stats(set, v.relation_count());
        CHECK(s.at(0).tph == 1.0);
        CHECK(s.at(0).hpt == 1.0);
        CHECK(s.at(0).category == RelationCategory::one_to_one);
    }
    SUBCASE("1-N") {
        auto set = load("a\tr\tb\na\tr\tc\na\tr\td\n", v);
        auto s = compute_relation_stats(set, v.relation_count());
        CHECK(s.at(0).tph == 3.0);
        CHECK(s.at(0).hpt == 1.0);
        CHECK(s.at(0).category == RelationCategory::one_to_many);
    }
}

TEST_CASE("relations without training triples are unknown") {
    Vocabulary v;
    auto set = load("a\tr\tb\n", v);
    v.add_relation("unused");
    auto s = compute_relation_stats(set, v.relation_count());
    CHECK(s.find(1) == nullptr);
    CHECK_THROWS_AS(s.at(1), UnknownRelationError);
    CHECK_THROWS_AS(compute_relation_stats(TripleSet{}, 1), std::invalid_argument);
    CHECK_THROWS_AS(compute_relation_stats(set, 1, 0.0), std::invalid_argument);
}

TEST_CASE("category function is total") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 6.0);
    for (int i = 0; i < 2000; ++i) {
        const double tph = u(rng), hpt = u(rng);
        const auto c = categorize(tph, hpt, 1.5);
        const int matches = (tph < 1.5 && hpt < 1.5) + (tph >= 1.5 && hpt < 1.5) + (tph < 1.5 && hpt >= 1.5) +
                            (tph >= 1.5 && hpt >= 1.5);
        CHECK(matches == 1);
        CHECK(to_string(c).size() == 3);
    }
    CHECK(categorize(1.5, 1.0, 1.5) == RelationCategory::one_to_many);
    CHECK(categorize(1.0, 1.5, 1.5) == RelationCategory::many_to_one);
}

TEST_CASE("stats match brute-force grouping on random small graphs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t count = 1 + rng() % 100;
        auto set = testing::random_triples(rng, 12, 4, std::min<std::size_t>(count, 12 * 12 * 4));
        auto stats = compute_relation_stats(set, 4);
        auto ref = testing::ref_relation_stats(set);
        for (index_t r = 0; r < 4; ++r) {
            if (!ref.contains(r)) {
                CHECK(stats.find(r) == nullptr);
                continue;
            }
            CHECK(stats.at(r).tph == doctest::Approx(ref[r].tph).epsilon(1e-15));
            CHECK(stats.at(r).hpt == doctest::Approx(ref[r].hpt).epsilon(1e-15));
            CHECK(stats.at(r).tph >= 1.0);
            CHECK(stats.at(r).hpt >= 1.0);
        }
    }
}

TEST_CASE("filter index membership") {
    Vocabulary v;
    auto train = load("a\tr\tb\n", v);
    auto valid = load("a\tr\tc\n", v);
    TripleSet test;
    v.add_entity("d");
    auto idx = build_filter_index(train, valid, test);
    CHECK(idx.contains(Triple{0, 0, 1}));
    CHECK(idx.contains(Triple{0, 0, 2}));
    CHECK_FALSE(idx.contains(Triple{0, 0, 3}));
    CHECK(idx.size() == 2);
    auto tails = idx.tails(0, 0);
    CHECK(std::vector<index_t>(tails.begin(), tails.end()) == std::vector<index_t>{1, 2});
    CHECK(idx.heads(0, 2).size() == 1);
    CHECK(idx.heads(0, 0).empty());
}

TEST_CASE("duplicates across splits are stored once") {
    Vocabulary v;
    auto train = load("a\tr\tb\na\tr\tb\n", v);
    auto test = load("a\tr\tb\n", v);
    auto idx = build_filter_index(train, TripleSet{}, test);
    CHECK(idx.size() == 1);
    CHECK(idx.contains(Triple{0, 0, 1}));
    CHECK(idx.tails(0, 0).size() == 1);
    CHECK(train.size() == 2);
}

TEST_CASE("filter index equals a linear scan over the splits") {
    std::mt19937_64 rng(5);
    auto a = testing::random_triples(rng, 15, 3, 60);
    auto b = testing::random_triples(rng, 15, 3, 20, Split::valid);
    auto c = testing::random_triples(rng, 15, 3, 20, Split::test);
    auto idx = build_filter_index(a, b, c);
    for (index_t h = 0; h < 15; ++h) {
        for (index_t r = 0; r < 3; ++r) {
            for (index_t t = 0; t < 15; ++t) {
                const Triple q{h, r, t};
                bool scan = false;
                for (const auto* s : {&a, &b, &c}) {
                    scan = scan || std::find(s->triples.begin(), s->triples.end(), q) != s->triples.end();
                }
                CHECK(idx.contains(q) == scan);
                auto tails = idx.tails(h, r);
                CHECK(std::binary_search(tails.begin(), tails.end(), t) == scan);
                auto heads = idx.heads(r, t);
                CHECK(std::binary_search(heads.begin(), heads.end(), h) == scan);
            }
        }
    }
}

TEST_CASE("ill-posedness ratio") {
    CHECK(illposedness_ratio(100, 9, 1) == 10.0);
    CHECK(illposedness_ratio(0, 5, 1) == 0.0);
    CHECK_THROWS_AS(illposedness_ratio(5, 0, 0), std::domain_error);
    // WN18 training counts.
    CHECK(illposedness_ratio(141442, 40943, 18) == doctest::Approx(3.4531).epsilon(1e-4));
    // FB15K training counts.
    CHECK(illposedness_ratio(483142, 14951, 1345) == doctest::Approx(29.648).epsilon(1e-4));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "cider/graph.hpp"
#include "support/dsep_oracle.hpp"

using namespace cider;
using namespace cider::graph;

namespace {

Dag chain3() {
    Dag d;
    d.add_edge("X0", "X1");
    d.add_edge("X1", "X2");
    return d;
}

Dag fork3() {
    Dag d;
    d.add_edge("X1", "X0");
    d.add_edge("X1", "X2");
    return d;
}

Dag collider3() {
    Dag d;
    d.add_edge("X0", "X1");
    d.add_edge("X2", "X1");
    return d;
}

// S -> X1 -> X2, S -> X3, X2 -> X3
Dag figure_dag() {
    Dag d;
    d.add_edge("S", "X1");
    d.add_edge("X1", "X2");
    d.add_edge("S", "X3");
    d.add_edge("X2", "X3");
    return d;
}

std::set<std::vector<std::string>> path_set(const std::vector<std::vector<std::string>>& paths) {
    return {paths.begin(), paths.end()};
}

}  // namespace

TEST_CASE("dag construction invariants") {
    Dag d = chain3();
    CHECK(d.size() == 3);
    CHECK(d.edge_count() == 2);
    CHECK_THROWS_AS(d.add_edge("X0", "X0"), std::invalid_argument);
    CHECK_THROWS_AS(d.add_edge("X0", "X1"), std::invalid_argument);
    CHECK_THROWS_AS(d.add_edge("X2", "X0"), std::invalid_argument);  // closes a cycle
    CHECK_THROWS_AS(d.index_of("nope"), std::invalid_argument);

    d.mark_hidden("X1");
    CHECK(d.is_hidden("X1"));
    CHECK_FALSE(d.is_hidden("X0"));
    CHECK(d.hidden_nodes() == std::vector<std::string>{"X1"});
}

TEST_CASE("acyclicity rejects back edges inserted into random dags") {
    RngStream rng(31);
    int tested = 0;
    for (int rep = 0; rep < 40; ++rep) {
        Dag d = testing::random_dag(5, 0.5, rng);
        for (const auto& name : d.nodes()) {
            const int v = d.index_of(name);
            const auto desc = d.descendants(v);
            for (std::size_t u = 0; u < d.size(); ++u) {
                if (!desc[u]) continue;
                Dag copy = d;
                CHECK_THROWS_AS(copy.add_edge(d.name_of(static_cast<int>(u)), name),
                                std::invalid_argument);
                ++tested;
            }
        }
    }
    CHECK(tested > 100);
}

TEST_CASE("d-separation on the canonical three-node graphs") {
    CHECK(is_d_separated(chain3(), "X0", "X2", {"X1"}));
    CHECK_FALSE(is_d_separated(chain3(), "X0", "X2", {}));
    CHECK(is_d_separated(fork3(), "X0", "X2", {"X1"}));
    CHECK_FALSE(is_d_separated(collider3(), "X0", "X2", {"X1"}));
    CHECK(is_d_separated(collider3(), "X0", "X2", {}));
}

TEST_CASE("conditioning on the collider's descendant unblocks") {
    Dag d = collider3();
    d.add_edge("X1", "X3");
    CHECK_FALSE(is_d_separated(d, "X0", "X2", {"X3"}));
}

TEST_CASE("figure dag: S and X2 stay connected given both other features") {
    CHECK_FALSE(is_d_separated(figure_dag(), "S", "X2", {"X1", "X3"}));
    CHECK_FALSE(is_d_separated(figure_dag(), "S", "X2", {}));
}

TEST_CASE("d-separation argument errors") {
    const Dag d = chain3();
    CHECK_THROWS_AS(is_d_separated(d, "X0", "X0", {}), std::invalid_argument);
    CHECK_THROWS_AS(is_d_separated(d, "X0", "X2", {"X0"}), std::invalid_argument);
    CHECK_THROWS_AS(is_d_separated(d, "X0", "X2", {"zzz"}), std::invalid_argument);
    CHECK_THROWS_AS(is_d_separated(d, "X0", "zzz", {}), std::invalid_argument);
}

TEST_CASE("set d-separation") {
    CHECK(is_d_separated_sets(chain3(), {"X0"}, {"X2"}, {"X1"}));
    CHECK_FALSE(is_d_separated_sets(fork3(), {"X0"}, {"X2"}, {}));

    Dag two;
    two.add_node("A");
    two.add_node("B");
    CHECK(is_d_separated_sets(two, {"A"}, {"B"}, {}));

    CHECK_THROWS_AS(is_d_separated_sets(chain3(), {"X0"}, {"X0"}, {}), std::invalid_argument);
    CHECK_THROWS_AS(is_d_separated_sets(chain3(), {"X0"}, {"X2"}, {"X2"}), std::invalid_argument);
    CHECK_THROWS_AS(is_d_separated_sets(chain3(), {}, {"X2"}, {}), std::invalid_argument);
}

TEST_CASE("directed path enumeration") {
    CHECK(directed_paths(chain3(), "X0", "X2") ==
          std::vector<std::vector<std::string>>{{"X0", "X1", "X2"}});
    CHECK(directed_paths(collider3(), "X0", "X2").empty());

    const auto figure_paths = path_set(directed_paths(figure_dag(), "S", "X3"));
    const std::set<std::vector<std::string>> expected{{"S", "X3"}, {"S", "X1", "X2", "X3"}};
    CHECK(figure_paths == expected);

    CHECK_THROWS_AS(directed_paths(chain3(), "X0", "X0"), std::invalid_argument);
}

TEST_CASE("effect classification relative to the observed set") {
    Dag d;
    d.add_edge("C", "X1");
    d.add_edge("X1", "X2");
    CHECK(classify_effect(d, "C", "X2", {"C", "X1", "X2"}) == EffectClass::IndirectEffect);
    CHECK(classify_effect(d, "C", "X2", {"C", "X2"}) == EffectClass::DirectEffect);
    CHECK(classify_effect(d, "C", "X1", {"C", "X1", "X2"}) == EffectClass::DirectEffect);

    Dag iso;
    iso.add_edge("C", "X1");
    iso.add_node("X2");
    CHECK(classify_effect(iso, "C", "X2", {"C", "X1", "X2"}) == EffectClass::NonEffect);

    CHECK_THROWS_AS(classify_effect(d, "C", "X2", {"C", "X1"}), std::invalid_argument);
    CHECK_THROWS_AS(classify_effect(d, "C", "C", {"C", "X1", "X2"}), std::invalid_argument);
}

TEST_CASE("hidden mediators keep an effect direct") {
    Dag d;
    d.add_edge("C", "H");
    d.add_edge("H", "X1");
    d.mark_hidden("H");
    CHECK(classify_effect(d, "C", "X1", {"C", "X1"}) == EffectClass::DirectEffect);
}

TEST_CASE("classification is NonEffect exactly when no directed path exists") {
    RngStream rng(77);
    for (int rep = 0; rep < 80; ++rep) {
        const Dag d = testing::random_dag(5, 0.45, rng);
        const auto& names = d.nodes();
        for (const auto& c : names) {
            for (const auto& x : names) {
                if (c == x) continue;
                const auto cls = classify_effect(d, c, x, names);
                CHECK((cls == EffectClass::NonEffect) == directed_paths(d, c, x).empty());
            }
        }
    }
}

TEST_CASE("oracle relevance on the fixture graphs") {
    {
        Dag d;
        d.add_edge("S", "X1");
        d.add_edge("X1", "X2");
        const auto rel = oracle_relevance(d, "S", {"X1", "X2"});
        CHECK(rel[0].encoding_relevant);
        CHECK(rel[0].decoding_relevant);
        CHECK(rel[1].encoding_relevant);
        CHECK_FALSE(rel[1].decoding_relevant);  // X1 screens X2 off
    }
    {
        Dag d;
        d.add_edge("S", "X1");
        d.add_edge("X2", "X1");
        const auto rel = oracle_relevance(d, "S", {"X1", "X2"});
        CHECK_FALSE(rel[1].encoding_relevant);
        CHECK(rel[1].decoding_relevant);  // conditioning on the collider X1
    }
    {
        for (const auto& r : oracle_relevance(figure_dag(), "S", {"X1", "X2", "X3"})) {
            CHECK(r.encoding_relevant);
            CHECK(r.decoding_relevant);
        }
    }
    CHECK_THROWS_AS(oracle_relevance(chain3(), "X0", {"X0", "X1"}), std::invalid_argument);
}

TEST_CASE("oracle relevance rejects hidden features") {
    Dag d;
    d.add_edge("S", "X1");
    d.mark_hidden("X1");
    CHECK_THROWS_AS(oracle_relevance(d, "S", {"X1"}), std::invalid_argument);
}

TEST_CASE("implied independencies") {
    const auto stmts = implied_independencies(chain3(), {"X0", "X1", "X2"});
    const bool has_chain_triple =
        std::any_of(stmts.begin(), stmts.end(), [](const IndependenceStatement& s) {
            return s.a == "X0" && s.b == "X2" && s.given == std::vector<std::string>{"X1"};
        });
    CHECK(has_chain_triple);

    Dag full;
    full.add_edge("A", "B");
    full.add_edge("A", "C");
    full.add_edge("B", "C");
    CHECK(implied_independencies(full, {"A", "B", "C"}).empty());

    Dag iso;
    iso.add_node("A");
    iso.add_node("B");
    const auto iso_stmts = implied_independencies(iso, {"A", "B"});
    REQUIRE(iso_stmts.size() == 1);
    CHECK(iso_stmts[0].given.empty());
}

TEST_CASE("reachability agrees with the brute-force path enumerator on all 4-node dags") {
    const auto dags = testing::all_dags(4);
    CHECK(dags.size() == 543);  // known count of labeled DAGs on 4 nodes
    for (const auto& d : dags) {
        testing::for_each_triple(d, [&](const std::string& a, const std::string& b,
                                        const std::vector<std::string>& z) {
            CHECK(is_d_separated(d, a, b, z) == testing::dsep_bruteforce(d, a, b, z));
        });
    }
}

TEST_CASE("reachability agrees with brute force on random 5- and 6-node dags") {
    RngStream rng(2024);
    for (int rep = 0; rep < 60; ++rep) {
        const Dag d = testing::random_dag(rep % 2 == 0 ? 5 : 6, 0.4, rng);
        testing::for_each_triple(d, [&](const std::string& a, const std::string& b,
                                        const std::vector<std::string>& z) {
            CHECK(is_d_separated(d, a, b, z) == testing::dsep_bruteforce(d, a, b, z));
        });
    }
}

TEST_CASE("d-separation is symmetric in its endpoints") {
    RngStream rng(5150);
    for (int rep = 0; rep < 30; ++rep) {
        const Dag d = testing::random_dag(6, 0.4, rng);
        testing::for_each_triple(d, [&](const std::string& a, const std::string& b,
                                        const std::vector<std::string>& z) {
            CHECK(is_d_separated(d, a, b, z) == is_d_separated(d, b, a, z));
        });
    }
}

TEST_CASE("direct effects are never screened off by the remaining features") {
    // Backs the combined-inference deduction: a direct effect wrt the
    // observed set stays d-connected to the condition given all other
    // observed features.
    auto check_dag = [](const Dag& d) {
        const auto& names = d.nodes();
        const std::string& condition = names.front();
        const std::vector<std::string> features(names.begin() + 1, names.end());
        if (features.empty()) return;
        const auto rel = oracle_relevance(d, condition, features);
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (directed_paths(d, condition, features[i]).empty()) continue;
            if (classify_effect(d, condition, features[i], names) == EffectClass::DirectEffect)
                CHECK(rel[i].decoding_relevant);
        }
    };
    for (const auto& d : testing::all_dags(4)) check_dag(d);
    RngStream rng(99);
    for (int rep = 0; rep < 100; ++rep) check_dag(testing::random_dag(5, 0.45, rng));
}

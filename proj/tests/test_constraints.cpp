#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "star/constraints.hpp"

using namespace star;
using namespace star::constraints;

namespace {

IdSet from_mask(std::uint32_t mask, std::size_t n) {
    IdSet s;
    for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1u) s.push_back(static_cast<Id>(i));
    return s;
}

// Random DAG on n nodes: arcs only from lower to higher ids.
std::vector<std::pair<Id, Id>> random_dag(std::size_t n, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution arc(density);
    std::vector<std::pair<Id, Id>> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (arc(rng)) edges.emplace_back(static_cast<Id>(a), static_cast<Id>(b));
    return edges;
}

std::vector<Id> random_tree(std::size_t n, std::mt19937_64& rng) {
    std::vector<Id> parent(n, -1);
    for (std::size_t i = 1; i < n; ++i)
        parent[i] = static_cast<Id>(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    return parent;
}

// Brute force: the singletons {v} whose removal keeps the set in K.
std::set<IdSet> removable_singletons(const ConstraintSpec& c, const IdSet& set) {
    std::set<IdSet> out;
    for (Id v : set) {
        IdSet rest;
        for (Id u : set)
            if (u != v) rest.push_back(u);
        if (in_constraint(c, rest)) out.insert({v});
    }
    return out;
}

std::set<IdSet> as_set(const CandidateList& l) {
    auto v = l.to_sets();
    return {v.begin(), v.end()};
}

IdSet minus(const IdSet& a, std::span<const Id> b) {
    IdSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

ConstraintSpec grid(std::size_t side, double delta = kDefaultDelta) {
    std::vector<double> xs, ys;
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            xs.push_back(static_cast<double>(c));
            ys.push_back(static_cast<double>(r));
        }
    return ConstraintSpec::convex2d(xs, ys, delta);
}

IdSet all_ids(std::size_t n) {
    IdSet s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<Id>(i);
    return s;
}

}  // namespace

TEST_CASE("peel count and probe directions") {
    CHECK(peel_count(0.02, 2500) == 50);
    CHECK(peel_count(0.02, 10) == 1);
    CHECK(peel_count(0.5, 3) == 2);
    CHECK(peel_count(0.02, 0) == 0);
    CHECK(peel_count(1.0, 7) == 7);
    CHECK(probe_direction(0, 100) == std::pair{1.0, 0.0});
    CHECK(probe_direction(25, 100) == std::pair{0.0, 1.0});
    CHECK(probe_direction(50, 100) == std::pair{-1.0, 0.0});
    CHECK(probe_direction(75, 100) == std::pair{0.0, -1.0});
    const auto [c, s] = probe_direction(10, 100);
    CHECK(c == doctest::Approx(std::cos(0.2 * M_PI)));
    CHECK(s == doctest::Approx(std::sin(0.2 * M_PI)));
}

TEST_CASE("kind names round trip") {
    for (Kind k : {Kind::None, Kind::Convex2d, Kind::AxisBox, Kind::Tree, Kind::DagStrong, Kind::DagWeak})
        CHECK(kind_from_string(to_string(k)) == k);
    CHECK_THROWS(kind_from_string("hexagon"));
}

TEST_CASE("structure validation") {
    CHECK_THROWS_AS(ConstraintSpec::tree({-1, -1}), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::tree({1, 0}), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::tree({-1, 2, 1}), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::tree({-1, 5}), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::dag(3, {{0, 1}, {1, 2}, {2, 0}}, true), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::dag(2, {{0, 0}}, true), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::dag(2, {{0, 4}}, false), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::convex2d({0.0, 1.0}, {0.0}), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::convex2d({0.0}, {0.0}, 0.0), StructureError);
    CHECK_THROWS_AS(ConstraintSpec::axis_box(2, 1, {0.0, NAN}), StructureError);
}

TEST_CASE("tree membership and leaves") {
    //      0
    //    1   2
    //   3 4   5
    const auto t = ConstraintSpec::tree({-1, 0, 0, 1, 1, 2});
    CHECK(in_constraint(t, IdSet{0, 1, 3}));
    CHECK_FALSE(in_constraint(t, IdSet{0, 3}));
    CHECK(in_constraint(t, IdSet{}));
    CHECK(as_set(candidates(t, IdSet{0, 1, 2, 3})) == std::set<IdSet>{{2}, {3}});
    CHECK(as_set(candidates(t, IdSet{0})) == std::set<IdSet>{{0}});
    CHECK_THROWS(candidates(t, IdSet{3}));
    CHECK(as_set(candidates(t, IdSet{3}, false)) == std::set<IdSet>{{3}});
    CHECK(t.edges().size() == 5);
    CHECK(t.roots() == std::vector<Id>{0});
}

TEST_CASE("weak heredity keeps a child with another live parent") {
    // 0 -> 2, 1 -> 2
    const auto w = ConstraintSpec::dag(3, {{0, 2}, {1, 2}}, false);
    const auto s = ConstraintSpec::dag(3, {{0, 2}, {1, 2}}, true);
    CHECK(in_constraint(w, IdSet{0, 2}));
    CHECK_FALSE(in_constraint(s, IdSet{0, 2}));
    CHECK(as_set(candidates(w, IdSet{0, 1, 2})) == std::set<IdSet>{{0}, {1}, {2}});
    CHECK(as_set(candidates(s, IdSet{0, 1, 2})) == std::set<IdSet>{{2}});
    CHECK(as_set(candidates(w, IdSet{0, 2})) == std::set<IdSet>{{2}});
}

TEST_CASE("hierarchical candidates match brute force on small structures") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 3 + trial % 6;
        std::vector<ConstraintSpec> specs;
        specs.push_back(ConstraintSpec::tree(random_tree(n, rng)));
        const auto edges = random_dag(n, 0.4, rng);
        specs.push_back(ConstraintSpec::dag(n, edges, true));
        specs.push_back(ConstraintSpec::dag(n, edges, false));
        for (const auto& c : specs) {
            CAPTURE(to_string(c.kind()));
            CAPTURE(n);
            for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                const IdSet set = from_mask(mask, n);
                if (!in_constraint(c, set)) continue;
                const auto got = as_set(candidates(c, set));
                CHECK(got == removable_singletons(c, set));
                if (!set.empty()) CHECK_FALSE(got.empty());
            }
        }
    }
}

TEST_CASE("convex candidates keep the set convex") {
    const auto c = grid(12, 0.05);
    IdSet set = all_ids(c.size());
    REQUIRE(in_constraint(c, set));
    int steps = 0;
    while (!set.empty()) {
        const auto cands = candidates(c, set);
        REQUIRE_FALSE(cands.empty());
        const std::size_t k = peel_count(c.delta(), set.size());
        for (std::size_t j = 0; j < cands.size(); ++j) {
            CHECK(cands[j].size() == k);
            CHECK(in_constraint(c, minus(set, cands[j])));
        }
        // cycle through the probes
        set = minus(set, cands[steps % cands.size()]);
        ++steps;
    }
    CHECK(steps > 10);
}

TEST_CASE("convex candidates are distinct half-plane cuts") {
    const auto c = grid(10, 0.02);
    const IdSet set = all_ids(100);
    const auto cands = candidates(c, set);
    CHECK(as_set(cands).size() == cands.size());
    // axis probes break ties toward smaller ids
    CHECK(as_set(cands).count(IdSet{9, 19}) == 1);
    CHECK(as_set(cands).count(IdSet{90, 91}) == 1);
}

TEST_CASE("axis box candidates keep the set a box") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 200, d = 3;
    std::vector<double> coords(n * d);
    for (double& v : coords) v = u(rng);
    const auto c = ConstraintSpec::axis_box(n, d, coords, 0.05);
    IdSet set = all_ids(n);
    CHECK(in_constraint(c, set));
    int step = 0;
    while (!set.empty()) {
        const auto cands = candidates(c, set);
        CHECK(cands.size() == 2 * d);
        for (std::size_t j = 0; j < cands.size(); ++j) {
            CHECK_FALSE(cands[j].empty());
            CHECK(in_constraint(c, minus(set, cands[j])));
        }
        set = minus(set, cands[step++ % cands.size()]);
    }
}

TEST_CASE("unstructured candidates are singletons") {
    const auto c = ConstraintSpec::none(5);
    CHECK(as_set(candidates(c, IdSet{1, 3})) == std::set<IdSet>{{1}, {3}});
    CHECK_THROWS(candidates(c, IdSet{7}));
}

TEST_CASE("hull helpers") {
    using geometry::Point;
    const auto hull = geometry::convex_hull({{0, 0}, {2, 0}, {1, 0}, {2, 2}, {0, 2}, {1, 1}});
    CHECK(hull.size() == 4);
    CHECK(geometry::strictly_inside(hull, {1, 1}, 1e-9));
    CHECK_FALSE(geometry::strictly_inside(hull, {1, 0}, 1e-9));
    CHECK_FALSE(geometry::strictly_inside(hull, {3, 1}, 1e-9));
}

TEST_CASE("candidate list storage") {
    CandidateList l;
    CHECK(l.empty());
    l.push_singleton(4);
    const Id pair[] = {1, 2};
    l.push_back(pair);
    CHECK(l.size() == 2);
    CHECK(l.set(1) == IdSet{1, 2});
    CHECK(l[0].size() == 1);
}

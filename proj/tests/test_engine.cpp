#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "star/engine.hpp"
#include "star/scores.hpp"

using namespace star;
using namespace star::engine;

namespace {

Dataset dataset(std::vector<double> p, std::size_t dim = 0) {
    Dataset d;
    d.n = p.size();
    d.dim = dim;
    d.p = std::move(p);
    d.covariates.assign(d.n * dim, 0.0);
    for (std::size_t i = 0; i < d.n * dim; ++i) d.covariates[i] = static_cast<double>(i);
    return d;
}

std::vector<double> uniforms(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    for (double& x : p) x = u(rng);
    return p;
}

// Grid of side^2 points with a central block of small p-values.
Session grid_session(std::size_t side, std::uint64_t seed, double alpha) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset d;
    d.n = side * side;
    d.dim = 2;
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) {
            d.covariates.push_back(static_cast<double>(c));
            d.covariates.push_back(static_cast<double>(r));
            const bool signal = r > side / 4 && r < 3 * side / 4 && c > side / 4 && c < 3 * side / 4;
            d.p.push_back(signal ? u(rng) * 0.01 : u(rng));
        }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < d.n; ++i) {
        xs.push_back(d.covariates[2 * i]);
        ys.push_back(d.covariates[2 * i + 1]);
    }
    return Session(std::move(d), AccumulatorSpec::seqstep(0.5), ConstraintSpec::convex2d(xs, ys), alpha, seed);
}

// Peels the masked id with the smallest g, the opposite of the canonical
// choice; it keeps the largest-looking nulls for as long as possible.
class SmallestGRule : public UpdateRule {
public:
    std::string name() const override { return "smallest_g"; }
    IdSet choose(const AnalystView& v) override {
        Id best = v.current.front();
        for (Id i : v.current)
            if (v.masked_g[i] < v.masked_g[best]) best = i;
        return {best};
    }
};

}  // namespace

TEST_CASE("hand-worked halting example") {
    // seqstep 0.5: h = 2 above one half
    Session s(dataset({0.9, 0.1, 0.2, 0.05, 0.7}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(5), 0.5, 1);
    CHECK(s.sum_h() == doctest::Approx(4.0));
    CHECK(s.fdp_hat() == doctest::Approx(1.0));
    CHECK_FALSE(s.halted());
    CHECK_THROWS_AS(s.rejection(), HaltedError);
    s.peel(IdSet{0});
    CHECK(s.fdp_hat() == doctest::Approx(0.8));
    CHECK_FALSE(s.halted());
    s.peel(IdSet{4});
    CHECK(s.fdp_hat() == doctest::Approx(0.5));
    CHECK(s.halted());
    CHECK(s.rejection() == IdSet{1, 2, 3});
    CHECK(s.check_stop().rejection == IdSet{1, 2, 3});
    CHECK_THROWS_AS(s.peel(IdSet{1}), HaltedError);
}

TEST_CASE("peel validation") {
    Session s(dataset({0.9, 0.1, 0.2}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(3), 0.1, 1);
    CHECK_THROWS_AS(s.peel(IdSet{}), PeelError);
    CHECK_THROWS_AS(s.peel(IdSet{7}), PeelError);
    s.peel(IdSet{0});
    CHECK_THROWS_AS(s.peel(IdSet{0}), PeelError);
    CHECK(s.step() == 1);
}

TEST_CASE("session creation rejects bad inputs") {
    CHECK_THROWS_AS(Session(dataset({}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(0), 0.1, 1),
                    ValidationError);
    CHECK_THROWS_AS(Session(dataset({0.5, 1.5}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(2), 0.1, 1),
                    ValidationError);
    CHECK_THROWS_AS(Session(dataset({0.5, NAN}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(2), 0.1, 1),
                    ValidationError);
    CHECK_THROWS_AS(Session(dataset({0.5}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(1), 1.0, 1),
                    ValidationError);
    CHECK_THROWS_AS(Session(dataset({0.5}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(3), 0.1, 1),
                    ValidationError);
}

TEST_CASE("an empty set always halts") {
    Session s(dataset({0.9, 0.8}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(2), 0.01, 1);
    s.peel(IdSet{0, 1});
    CHECK(s.halted());
    CHECK(s.rejection().empty());
    CHECK(s.sum_h() == 0.0);
}

TEST_CASE("sets outside the constraint never halt") {
    // root null, eight strong children
    std::vector<double> p(9, 1e-4);
    p[0] = 0.9;
    std::vector<Id> parent(9, 0);
    parent[0] = -1;
    Session s(dataset(p), AccumulatorSpec::seqstep(0.5), ConstraintSpec::tree(parent), 0.3, 1);
    CHECK(s.fdp_hat() == doctest::Approx(0.4));
    s.peel(IdSet{0});
    CHECK(s.fdp_hat() <= 0.3);
    CHECK_FALSE(s.in_constraint());
    CHECK_FALSE(s.halted());
    CHECK_FALSE(s.view()->candidates.empty());
}

TEST_CASE("the view masks exactly the current set") {
    Session s = grid_session(12, 3, 0.1);
    scores::CanonicalRule rule;
    while (!s.halted()) {
        const auto v = s.view();
        for (std::size_t i = 0; i < v->n; ++i) {
            const bool in_set = std::binary_search(v->current.begin(), v->current.end(), static_cast<Id>(i));
            CHECK(v->is_masked(static_cast<Id>(i)) == in_set);
            CHECK(v->is_revealed(static_cast<Id>(i)) == !in_set);
            if (in_set) CHECK(v->masked_g[i] == s.spec().mask(s.data().p[i]));
        }
        CHECK(v->public_data->p.empty());
        const auto j = view_to_json(*v);
        for (const auto& m : j["masked"]) CHECK_FALSE(m.contains("p"));
        CHECK(j["revealed"].size() == v->n - v->current.size());
        CHECK_FALSE(j.contains("rejection"));
        s.peel(rule.choose(*v));
    }
    const auto v = s.view();
    CHECK(v->disclosed);
    CHECK(v->candidates.empty());
    CHECK(view_to_json(*v)["rejection"].get<IdSet>() == s.rejection());
}

TEST_CASE("disclosure can be switched off") {
    Session s(dataset({0.01, 0.02, 0.9}), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(3), 0.7, 1, false);
    s.peel(IdSet{2});
    REQUIRE(s.halted());
    const auto v = s.view();
    CHECK_FALSE(v->disclosed);
    CHECK_FALSE(v->is_revealed(0));
    CHECK(v->is_revealed(2));
}

TEST_CASE("filtration shrinks and history replays the trajectory") {
    Session s = grid_session(20, 9, 0.1);
    scores::CanonicalRule rule;
    run_auto(s, rule);
    REQUIRE(s.halted());
    const auto hist = s.history().to_vector();
    CHECK(hist.size() == s.step() + 1);
    CHECK(hist[0].removed.empty());
    std::vector<char> gone(s.n(), 0);
    std::size_t size = s.n();
    double sum_h = 0.0;
    for (double p : s.data().p) sum_h += s.spec().h(p);
    for (std::size_t k = 1; k < hist.size(); ++k) {
        CHECK(hist[k].step == k);
        CHECK_FALSE(hist[k].removed.empty());
        for (Id v : hist[k].removed) {
            CHECK_FALSE(gone[v]);
            gone[v] = 1;
            sum_h -= s.spec().h(s.data().p[v]);
        }
        size -= hist[k].removed.size();
        CHECK(hist[k].fdp_hat == doctest::Approx(s.spec().fdp_hat(size ? sum_h : 0.0, size)));
        if (k + 1 < hist.size()) CHECK((hist[k].fdp_hat > s.alpha() || !hist[k].in_constraint));
    }
    CHECK(size == s.rejection().size());
    CHECK(hist.back().fdp_hat <= s.alpha() + 1e-12);
}

TEST_CASE("history crosses chunk boundaries") {
    std::mt19937_64 rng(1);
    const auto p = uniforms(700, rng);
    Session s(dataset(p), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(700), 0.001, 1);
    for (Id i = 0; i < 600; ++i) s.peel(IdSet{i});
    const auto log = s.history();
    CHECK(log.size() == 601);
    CHECK(log[256].removed == IdSet{255});
    CHECK(log[600].removed == IdSet{599});
    CHECK(log.to_vector().size() == 601);
    // an older snapshot is unaffected by later peels
    s.peel(IdSet{650});
    CHECK(log.size() == 601);
    CHECK(s.history().size() == 602);
}

TEST_CASE("automated runs are deterministic") {
    Session a = grid_session(16, 4, 0.2);
    Session b = grid_session(16, 4, 0.2);
    scores::CanonicalRule ra, rb;
    run_auto(a, ra);
    run_auto(b, rb);
    CHECK(a.rejection() == b.rejection());
    CHECK(a.history().to_vector() == b.history().to_vector());
}

TEST_CASE("run_auto honours the step budget") {
    Session s = grid_session(16, 4, 0.2);
    scores::CanonicalRule rule;
    CHECK(run_auto(s, rule, 3) == 3);
    CHECK(s.step() == 3);
}

TEST_CASE("snapshot round trip") {
    Session s = grid_session(14, 6, 0.1);
    scores::CanonicalRule rule;
    run_auto(s, rule, 5);
    const auto snap = snapshot_to_json(s, true);
    Session back = session_from_snapshot(nlohmann::json::parse(snap.dump()));
    CHECK(view_to_json(*back.view()).dump() == view_to_json(*s.view()).dump());
    CHECK(snapshot_to_json(back, true).dump() == snap.dump());

    const auto analyst = snapshot_to_json(s, false);
    CHECK_FALSE(analyst.contains("oracle"));
    CHECK_THROWS_AS(session_from_snapshot(analyst), ValidationError);

    auto bad = snap;
    bad["step"] = 99;
    CHECK_THROWS_AS(session_from_snapshot(bad), ValidationError);
}

TEST_CASE("constraint json round trip") {
    Dataset d = dataset({0.1, 0.2, 0.3, 0.4}, 2);
    for (const auto& c : {ConstraintSpec::none(4), ConstraintSpec::tree({-1, 0, 0, 1}),
                          ConstraintSpec::dag(4, {{0, 2}, {1, 2}, {2, 3}}, true),
                          ConstraintSpec::dag(4, {{0, 2}, {1, 2}}, false)}) {
        const auto j = constraint_to_json(c);
        const auto back = constraint_from_json(j, d);
        CHECK(back.kind() == c.kind());
        CHECK(back.edges() == c.edges());
    }
    const auto cv = constraint_from_json({{"kind", "convex2d"}, {"delta", 0.1}, {"angles", 8}}, d);
    CHECK(cv.angles() == 8);
    CHECK(cv.xs()[1] == 2.0);
    CHECK_THROWS_AS(constraint_from_json({{"kind", "tree"}, {"parent", {1, 0, 0, 0}}}, d), ValidationError);
    CHECK_THROWS_AS(constraint_from_json({{"kind", "blob"}}, d), ValidationError);
    CHECK_THROWS_AS(constraint_from_json({{"kind", "convex2d"}}, dataset({0.1}, 1)), ValidationError);
}

TEST_CASE("fdr under the global null with an adversarial rule") {
    std::mt19937_64 rng(2024);
    const int reps = 300;
    for (double alpha : {0.05, 0.2}) {
        double total = 0.0, total_sq = 0.0;
        for (int r = 0; r < reps; ++r) {
            Session s(dataset(uniforms(200, rng)), AccumulatorSpec::seqstep(0.5), ConstraintSpec::none(200), alpha, r);
            SmallestGRule rule;
            run_auto(s, rule);
            const double fdp = s.rejection().empty() ? 0.0 : 1.0;
            total += fdp;
            total_sq += fdp * fdp;
        }
        const double mean = total / reps;
        const double se = std::sqrt(std::max(0.0, total_sq / reps - mean * mean) / reps);
        CAPTURE(alpha);
        CHECK(mean <= alpha + 3.0 * se + 1e-12);
    }
}

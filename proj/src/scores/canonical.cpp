#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "star/scores.hpp"

namespace star::scores {

double canonical_score(const AnalystView& view, std::span<const Id> candidate) {
    if (candidate.empty()) throw std::invalid_argument("candidate is empty");
    double total = 0.0;
    for (Id v : candidate) {
        if (v < 0 || static_cast<std::size_t>(v) >= view.n || !view.is_masked(v))
            throw std::invalid_argument("candidate contains id " + std::to_string(v) +
                                        " which is not masked");
        total += view.masked_g[v];
    }
    return total / static_cast<double>(candidate.size());
}

double mean_score(std::span<const double> per_id, std::span<const Id> candidate) {
    if (candidate.empty()) throw std::invalid_argument("candidate is empty");
    double total = 0.0;
    for (Id v : candidate) total += per_id[v];
    return total / static_cast<double>(candidate.size());
}

namespace {

template <class Candidates>
std::size_t select_worst_impl(const Candidates& candidates, std::span<const double> scores,
                              Direction direction) {
    if (candidates.empty()) throw std::invalid_argument("no candidates to choose from");
    if (scores.size() != candidates.size())
        throw std::invalid_argument("one score per candidate is required");
    std::size_t best = 0;
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const double a = scores[k];
        const double b = scores[best];
        const bool better = direction == Direction::PeelLargest ? a > b : a < b;
        if (better) {
            best = k;
        } else if (a == b) {
            std::span<const Id> ck = candidates[k];
            std::span<const Id> cb = candidates[best];
            if (std::lexicographical_compare(ck.begin(), ck.end(), cb.begin(), cb.end())) best = k;
        }
    }
    return best;
}

}  // namespace

std::size_t select_worst(const constraints::CandidateList& candidates,
                         std::span<const double> scores, Direction direction) {
    return select_worst_impl(candidates, scores, direction);
}

std::size_t select_worst(const std::vector<IdSet>& candidates, std::span<const double> scores,
                         Direction direction) {
    return select_worst_impl(candidates, scores, direction);
}

std::vector<MaskedPair> masked_pairs(const AnalystView& view) {
    std::vector<MaskedPair> out;
    out.reserve(view.current.size());
    for (Id v : view.current) {
        const double q = view.masked_g[v];
        out.push_back({v, q, view.spec->s(q), std::abs(view.spec->s_derivative(q))});
    }
    return out;
}

ScoreConfig score_config_from_json(const nlohmann::json& j) {
    ScoreConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw std::invalid_argument("score: expected an object");
    if (j.contains("kind")) {
        if (!j["kind"].is_string()) throw std::invalid_argument("score.kind: expected a string");
        c.kind = j["kind"].get<std::string>();
    }
    if (c.kind != "canonical" && c.kind != "beta_gam" && c.kind != "gauss_isotonic" &&
        c.kind != "gauss_laplacian")
        throw std::invalid_argument("score.kind: unknown rule '" + c.kind + "'");
    auto num = [&](const char* key, double& out) {
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_number())
            throw std::invalid_argument(std::string("score.") + key + ": expected a number");
        out = j[key].get<double>();
    };
    auto integer = [&](const char* key, int& out) {
        if (!j.contains(key) || j[key].is_null()) return;
        if (!j[key].is_number_integer())
            throw std::invalid_argument(std::string("score.") + key + ": expected an integer");
        out = j[key].get<int>();
    };
    integer("knots", c.knots);
    integer("em_iters", c.em_iters);
    num("ridge", c.ridge);
    num("lambda", c.lambda);
    if (j.contains("target") && !j["target"].is_null()) {
        if (!j["target"].is_string()) throw std::invalid_argument("score.target: expected a string");
        c.target = j["target"].get<std::string>();
        if (c.target != "posterior" && c.target != "mu")
            throw std::invalid_argument("score.target: must be posterior or mu");
    }
    if (c.knots < 0) throw std::invalid_argument("score.knots: must be non-negative");
    if (c.em_iters < 1) throw std::invalid_argument("score.em_iters: must be positive");
    if (!(c.ridge >= 0.0)) throw std::invalid_argument("score.ridge: must be non-negative");
    if (!(c.lambda >= 0.0)) throw std::invalid_argument("score.lambda: must be non-negative");
    return c;
}

nlohmann::json to_json(const ScoreConfig& c) {
    return {{"kind", c.kind},
            {"knots", c.knots},
            {"ridge", c.ridge},
            {"lambda", c.lambda},
            {"em_iters", c.em_iters},
            {"target", c.target}};
}

}  // namespace star::scores

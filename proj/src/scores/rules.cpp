#include <stdexcept>

#include "star/scores.hpp"

namespace star::scores {
namespace {

using constraints::Kind;

IdSet peel_by_per_id(const AnalystView& view, std::span<const double> per_id, Direction dir) {
    std::vector<double> scores;
    scores.reserve(view.candidates.size());
    for (std::size_t k = 0; k < view.candidates.size(); ++k)
        scores.push_back(mean_score(per_id, view.candidates[k]));
    return view.candidates.set(select_worst(view.candidates, scores, dir));
}

}  // namespace

IdSet CanonicalRule::choose(const AnalystView& view) {
    std::vector<double> scores;
    scores.reserve(view.candidates.size());
    for (std::size_t k = 0; k < view.candidates.size(); ++k)
        scores.push_back(canonical_score(view, view.candidates[k]));
    return view.candidates.set(select_worst(view.candidates, scores, dir_));
}

void LastInOrderRule::check_compatible(const engine::ConstraintSpec& c) const {
    if (c.kind() != Kind::None)
        throw engine::ValidationError("last_in_order rule needs an unconstrained session");
    if (order_.size() != c.size())
        throw engine::ValidationError("last_in_order rule: ordering must cover every id");
}

IdSet LastInOrderRule::choose(const AnalystView& view) {
    while (!order_.empty() && !view.is_masked(order_.back())) order_.pop_back();
    if (order_.empty()) throw std::logic_error("last_in_order rule: nothing left to peel");
    return {order_.back()};
}

void BetaGamRule::check_compatible(const engine::ConstraintSpec& c) const { (void)c; }

IdSet BetaGamRule::choose(const AnalystView& view) {
    if (!fitter_) fitter_ = std::make_unique<BetaGamFitter>(*view.public_data, cfg_);
    model_ = fitter_->fit(view, model_ ? &*model_ : nullptr);
    const auto& score = cfg_.target == "mu" ? model_->mu : model_->posterior;
    return peel_by_per_id(view, score, Direction::PeelSmallest);
}

void GaussIsotonicRule::check_compatible(const engine::ConstraintSpec& c) const {
    if (c.kind() != Kind::Tree)
        throw engine::ValidationError("gauss_isotonic rule needs a tree constraint, got " +
                                      constraints::to_string(c.kind()));
}

IdSet GaussIsotonicRule::choose(const AnalystView& view) {
    const auto& c = *view.constraint;
    std::vector<Id> parent(view.n);
    for (std::size_t v = 0; v < view.n; ++v) parent[v] = c.parent_of(static_cast<Id>(v));
    auto m_step = [&](const std::vector<double>& r) { return tree_isotonic(parent, r); };
    model_ = fit_gauss(view, cfg_.em_iters, m_step, model_ ? &*model_ : nullptr);
    return peel_by_per_id(view, model_->mu, Direction::PeelSmallest);
}

void GaussLaplacianRule::check_compatible(const engine::ConstraintSpec& c) const {
    if (c.kind() != Kind::Tree && c.kind() != Kind::DagStrong && c.kind() != Kind::DagWeak)
        throw engine::ValidationError("gauss_laplacian rule needs a tree or DAG constraint, got " +
                                      constraints::to_string(c.kind()));
}

IdSet GaussLaplacianRule::choose(const AnalystView& view) {
    const auto edges = view.constraint->edges();
    auto m_step = [&](const std::vector<double>& r) {
        return laplacian_solve(view.n, edges, cfg_.lambda, r).x;
    };
    model_ = fit_gauss(view, cfg_.em_iters, m_step, model_ ? &*model_ : nullptr);
    return peel_by_per_id(view, model_->mu, Direction::PeelSmallest);
}

std::unique_ptr<engine::UpdateRule> make_rule(const ScoreConfig& cfg) {
    if (cfg.kind == "canonical") return std::make_unique<CanonicalRule>();
    if (cfg.kind == "beta_gam") return std::make_unique<BetaGamRule>(cfg);
    if (cfg.kind == "gauss_isotonic") return std::make_unique<GaussIsotonicRule>(cfg);
    if (cfg.kind == "gauss_laplacian") return std::make_unique<GaussLaplacianRule>(cfg);
    throw engine::ValidationError("score.kind: unknown rule '" + cfg.kind + "'");
}

}  // namespace star::scores

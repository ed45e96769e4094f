#pragma once
// Candidate scoring: canonical mean-g scores and quasi-EM model-assisted
// scores, plus the automated update rules built on them.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "star/engine.hpp"

namespace star::scores {

using engine::AnalystView;

enum class Direction { PeelLargest, PeelSmallest };

// Mean of g over the candidate; throws std::invalid_argument on revealed ids.
double canonical_score(const AnalystView& view, std::span<const Id> candidate);
// Mean of per-id scores over the candidate.
double mean_score(std::span<const double> per_id, std::span<const Id> candidate);
// Index of the candidate to peel; ties go to the lexicographically smallest set.
std::size_t select_worst(const constraints::CandidateList& candidates,
                         std::span<const double> scores, Direction direction);
std::size_t select_worst(const std::vector<IdSet>& candidates, std::span<const double> scores,
                         Direction direction);

// Masked entries as the two-point preimage {q, s(q)} with |s'(q)|.
struct MaskedPair {
    Id id;
    double q;
    double s;
    double abs_ds;
};
std::vector<MaskedPair> masked_pairs(const AnalystView& view);

// ---- additive cubic B-spline basis ------------------------------------------

class SplineBasis {
public:
    // Interior knots at empirical quantiles of each coordinate; the first
    // B-spline of each coordinate is dropped and an intercept column added.
    static SplineBasis fit(const engine::Dataset& data, int interior_knots = 8);

    std::size_t size() const { return size_; }
    std::size_t dim() const { return knots_.size(); }
    void row(std::span<const double> x, std::span<double> out) const;
    // Row-major n x size() design matrix.
    std::vector<double> design(const engine::Dataset& data) const;

    // Cubic B-spline values at x for a clamped knot vector.
    static std::vector<double> bspline_values(const std::vector<double>& knots, double x);

private:
    std::vector<std::vector<double>> knots_;  // clamped knot vector per coordinate; empty if constant
    std::vector<std::size_t> offset_;
    std::size_t size_ = 1;
};

// ---- Gamma GLM with inverse link ----------------------------------------------

struct GlmResult {
    std::vector<double> beta;
    std::vector<double> mu;
    int iterations = 0;
    bool converged = false;
    // Step-halving hit its cap; beta is the last accepted iterate.
    bool degraded = false;
};

// Maximizes sum(log eta - y eta) - ridge/2 |beta_{1:}|^2 with eta = X beta = 1/mu
// by Newton steps with step-halving that keeps eta > 0. Column 0 is the intercept.
GlmResult fit_gamma_glm(std::span<const double> x, std::size_t n, std::size_t m,
                        std::span<const double> y, double ridge,
                        std::span<const double> warm_beta = {}, int max_iter = 100);

// ---- quasi-EM models --------------------------------------------------------------

struct ScoreConfig {
    std::string kind = "canonical";  // canonical | beta_gam | gauss_isotonic | gauss_laplacian
    int knots = 8;
    double ridge = 1e-6;
    double lambda = 1.0;
    int em_iters = 10;
    std::string target = "posterior";  // beta_gam peel score: posterior | mu
};

ScoreConfig score_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoreConfig& c);

struct BetaGamModel {
    std::vector<double> beta;
    std::vector<double> mu;  // per id; larger means stronger signal
    std::vector<double> posterior;  // E[-log p | view] under the fitted mu
    std::vector<double> loglik;  // observed-data log-likelihood after each round
    int rounds = 0;
    bool degraded = false;
};

// Beta(1/mu, 1) density of p with E(-log p) = mu.
double beta_log_density(double p, double mu);
// w = f(q) / (f(q) + |s'(q)| f(s(q))).
double beta_estep_weight(const MaskedPair& m, double mu);
// Observed-data log-likelihood of the view under per-id means.
double beta_observed_loglik(const AnalystView& view, std::span<const double> mu);

class BetaGamFitter {
public:
    BetaGamFitter(const engine::Dataset& public_data, const ScoreConfig& cfg);
    // Runs up to cfg.em_iters rounds starting from `warm` when given.
    BetaGamModel fit(const AnalystView& view, const BetaGamModel* warm = nullptr,
                     bool early_stop = true) const;
    const SplineBasis& basis() const { return basis_; }

private:
    SplineBasis basis_;
    std::vector<double> design_;
    ScoreConfig cfg_;
};

// Gaussian E-step on z = Phi^{-1}(1 - p): w = 1/(1 + |s'| exp(mu (z_hi - z_lo))).
double gauss_estep_weight(double z_lo, double z_hi, double abs_ds, double mu);

// Exact L2 isotonic regression on a rooted tree with mu_parent >= mu_child.
// parent[i] == -1 marks the root; unit weights.
std::vector<double> tree_isotonic(std::span<const Id> parent, std::span<const double> y);

// Solves (I + lambda L) mu = r by conjugate gradients, L the Laplacian of
// the undirected graph on `edges`.
struct CgResult {
    std::vector<double> x;
    int iterations = 0;
    double residual = 0.0;  // ||(I + lambda L) x - r|| / ||r||
};
CgResult laplacian_solve(std::size_t n, const std::vector<std::pair<Id, Id>>& edges,
                         double lambda, std::span<const double> r, double tol = 1e-8,
                         int max_iter = 0);

struct GaussModel {
    std::vector<double> mu;
    int rounds = 0;
};

// Quasi-EM for the Gaussian models; `m_step` maps pseudo-responses to means.
GaussModel fit_gauss(const AnalystView& view, int em_iters,
                     const std::function<std::vector<double>(const std::vector<double>&)>& m_step,
                     const GaussModel* warm = nullptr);

// ---- update rules ------------------------------------------------------------------

class CanonicalRule : public engine::UpdateRule {
public:
    explicit CanonicalRule(Direction d = Direction::PeelLargest) : dir_(d) {}
    std::string name() const override { return "canonical"; }
    IdSet choose(const AnalystView& view) override;

private:
    Direction dir_;
};

// Peels the last element of a fixed ordering that is still in the current set.
class LastInOrderRule : public engine::UpdateRule {
public:
    explicit LastInOrderRule(std::vector<Id> order) : order_(std::move(order)) {}
    std::string name() const override { return "last_in_order"; }
    void check_compatible(const engine::ConstraintSpec& c) const override;
    IdSet choose(const AnalystView& view) override;

private:
    std::vector<Id> order_;
};

class BetaGamRule : public engine::UpdateRule {
public:
    explicit BetaGamRule(ScoreConfig cfg) : cfg_(std::move(cfg)) {}
    std::string name() const override { return "beta_gam"; }
    void check_compatible(const engine::ConstraintSpec& c) const override;
    IdSet choose(const AnalystView& view) override;
    const BetaGamModel* model() const { return model_ ? &*model_ : nullptr; }

private:
    ScoreConfig cfg_;
    std::unique_ptr<BetaGamFitter> fitter_;
    std::optional<BetaGamModel> model_;
};

class GaussIsotonicRule : public engine::UpdateRule {
public:
    explicit GaussIsotonicRule(ScoreConfig cfg) : cfg_(std::move(cfg)) {}
    std::string name() const override { return "gauss_isotonic"; }
    void check_compatible(const engine::ConstraintSpec& c) const override;
    IdSet choose(const AnalystView& view) override;

private:
    ScoreConfig cfg_;
    std::optional<GaussModel> model_;
};

class GaussLaplacianRule : public engine::UpdateRule {
public:
    explicit GaussLaplacianRule(ScoreConfig cfg) : cfg_(std::move(cfg)) {}
    std::string name() const override { return "gauss_laplacian"; }
    void check_compatible(const engine::ConstraintSpec& c) const override;
    IdSet choose(const AnalystView& view) override;

private:
    ScoreConfig cfg_;
    std::optional<GaussModel> model_;
};

std::unique_ptr<engine::UpdateRule> make_rule(const ScoreConfig& cfg);

}  // namespace star::scores

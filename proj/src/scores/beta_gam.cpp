#include <algorithm>
#include <cmath>

#include "star/scores.hpp"

namespace star::scores {
namespace {

constexpr double kMinP = 1e-15;

double safe_log(double p) { return std::log(std::clamp(p, kMinP, 1.0)); }

}  // namespace

double beta_log_density(double p, double mu) { return -std::log(mu) + (1.0 / mu - 1.0) * safe_log(p); }

double beta_estep_weight(const MaskedPair& m, double mu) {
    const double d = (1.0 / mu - 1.0) * (safe_log(m.s) - safe_log(m.q));
    return 1.0 / (1.0 + m.abs_ds * std::exp(d));
}

double beta_observed_loglik(const AnalystView& view, std::span<const double> mu) {
    double total = 0.0;
    for (const MaskedPair& m : masked_pairs(view)) {
        const double lq = beta_log_density(m.q, mu[m.id]);
        const double ls = beta_log_density(m.s, mu[m.id]);
        total += lq + std::log1p(m.abs_ds * std::exp(ls - lq));
    }
    for (std::size_t i = 0; i < view.n; ++i) {
        const Id id = static_cast<Id>(i);
        if (!view.is_masked(id)) total += beta_log_density(view.revealed_p[i], mu[i]);
    }
    return total;
}

BetaGamFitter::BetaGamFitter(const engine::Dataset& public_data, const ScoreConfig& cfg)
    : basis_(SplineBasis::fit(public_data, cfg.knots)),
      design_(basis_.design(public_data)),
      cfg_(cfg) {}

BetaGamModel BetaGamFitter::fit(const AnalystView& view, const BetaGamModel* warm,
                                bool early_stop) const {
    const std::size_t n = view.n;
    const std::size_t m = basis_.size();
    const auto pairs = masked_pairs(view);
    BetaGamModel model;
    model.mu = warm ? warm->mu : std::vector<double>(n, 1.0);
    model.beta = warm ? warm->beta : std::vector<double>{};
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!view.is_masked(static_cast<Id>(i))) y[i] = -safe_log(view.revealed_p[i]);
    for (int round = 0; round < cfg_.em_iters; ++round) {
        for (const MaskedPair& mp : pairs) {
            const double w = beta_estep_weight(mp, model.mu[mp.id]);
            y[mp.id] = -(w * safe_log(mp.q) + (1.0 - w) * safe_log(mp.s));
        }
        GlmResult glm = fit_gamma_glm(design_, n, m, y, cfg_.ridge, model.beta);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            change = std::max(change, std::abs(glm.mu[i] - model.mu[i]) / model.mu[i]);
        model.beta = std::move(glm.beta);
        model.mu = std::move(glm.mu);
        model.degraded = model.degraded || glm.degraded;
        model.rounds = round + 1;
        model.loglik.push_back(beta_observed_loglik(view, model.mu));
        if (early_stop && change < 1e-4) break;
    }
    for (const MaskedPair& mp : pairs) {
        const double w = beta_estep_weight(mp, model.mu[mp.id]);
        y[mp.id] = -(w * safe_log(mp.q) + (1.0 - w) * safe_log(mp.s));
    }
    model.posterior = std::move(y);
    return model;
}

}  // namespace star::scores

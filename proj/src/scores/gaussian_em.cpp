#include <algorithm>
#include <cmath>

#include "star/normal.hpp"
#include "star/scores.hpp"

namespace star::scores {

double gauss_estep_weight(double z_lo, double z_hi, double abs_ds, double mu) {
    return 1.0 / (1.0 + abs_ds * std::exp(mu * (z_hi - z_lo)));
}

GaussModel fit_gauss(const AnalystView& view, int em_iters,
                     const std::function<std::vector<double>(const std::vector<double>&)>& m_step,
                     const GaussModel* warm) {
    struct Masked {
        Id id;
        double z_lo;
        double z_hi;
        double abs_ds;
    };
    std::vector<Masked> masked;
    for (const MaskedPair& mp : masked_pairs(view))
        masked.push_back({mp.id, stats::z_from_p(mp.q), stats::z_from_p(mp.s), mp.abs_ds});
    std::vector<double> r(view.n);
    for (std::size_t i = 0; i < view.n; ++i)
        if (!view.is_masked(static_cast<Id>(i))) r[i] = stats::z_from_p(view.revealed_p[i]);

    GaussModel model;
    if (warm && warm->mu.size() == view.n) {
        model.mu = warm->mu;
    } else {
        for (const Masked& m : masked) r[m.id] = m.z_lo;
        model.mu = m_step(r);
    }
    for (int round = 0; round < em_iters; ++round) {
        for (const Masked& m : masked) {
            const double w = gauss_estep_weight(m.z_lo, m.z_hi, m.abs_ds, model.mu[m.id]);
            r[m.id] = w * m.z_lo + (1.0 - w) * m.z_hi;
        }
        std::vector<double> next = m_step(r);
        double change = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < view.n; ++i) {
            change = std::max(change, std::abs(next[i] - model.mu[i]));
            scale = std::max(scale, std::abs(next[i]));
        }
        model.mu = std::move(next);
        model.rounds = round + 1;
        if (change <= 1e-6 * (1.0 + scale)) break;
    }
    return model;
}

}  // namespace star::scores

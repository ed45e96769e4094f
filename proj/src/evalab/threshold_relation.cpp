#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "star/evalab.hpp"
#include "star/normal.hpp"

namespace star::evalab {
namespace {

constexpr int kMaxAttempts = 5;

// P(p <= t) for p = 1 - Phi(z), z ~ N(mu, 1)
double alt_cdf(double t, double mu) { return stats::normal_sf(stats::normal_isf(t) - mu); }

}  // namespace

ThresholdRelation threshold_relation_check(double pi0, double mu_alt, double pstar, std::size_t n,
                                           double alpha, std::uint64_t seed) {
    if (!(pi0 >= 0.0 && pi0 <= 1.0)) throw std::invalid_argument("pi0 must lie in [0,1]");
    if (n == 0) throw std::invalid_argument("n must be positive");
    const auto spec = AccumulatorSpec::seqstep(pstar);
    const auto signals = static_cast<std::size_t>(std::llround((1.0 - pi0) * static_cast<double>(n)));
    ThresholdRelation out;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        out.attempts = attempt + 1;
        Rng rng(replicate_seed(seed, static_cast<std::uint64_t>(attempt)));
        std::normal_distribution<double> norm;
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = stats::normal_sf(norm(rng) + (i < signals ? mu_alt : 0.0));

        const IdSet a = storey_bh(p, alpha);

        // canonical unconstrained STAR keeps the smallest masked values longest
        std::vector<double> g(n), h(n);
        spec.mask_all(p, g, h);
        std::vector<Id> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Id x, Id y) { return g[x] < g[y] || (g[x] == g[y] && x > y); });
        std::vector<double> ordered(n);
        for (std::size_t k = 0; k < n; ++k) ordered[k] = p[order[k]];
        const std::size_t k = fixed_order_accumulation(ordered, spec, alpha);
        IdSet b(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(b.begin(), b.end());

        if (signals == 0 && a.empty() && b.empty()) {
            out.skipped = true;
            return out;
        }
        if (a.empty() || b.empty()) continue;

        out.rejected_bh = a.size();
        out.rejected_star = b.size();
        out.t_bh = 0.0;
        out.t_star = 0.0;
        out.bh_above_pstar = out.star_above_pstar = 0;
        for (Id i : a) {
            out.t_bh = std::max(out.t_bh, p[i]);
            out.bh_above_pstar += p[i] > pstar;
        }
        for (Id i : b) {
            if (p[i] <= pstar)
                out.t_star = std::max(out.t_star, p[i]);
            else
                ++out.star_above_pstar;
        }
        if (out.t_star <= 0.0) continue;
        out.lhs = alt_cdf(out.t_bh, mu_alt) / out.t_bh;
        out.rhs = pstar * alt_cdf(out.t_star, mu_alt) / out.t_star;
        out.ratio = out.lhs / out.rhs;
        std::vector<Id> uni, inter;
        std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
        out.sym_diff = static_cast<double>(uni.size() - inter.size()) / static_cast<double>(uni.size());
        return out;
    }
    throw std::runtime_error("threshold relation: no rejections after " + std::to_string(kMaxAttempts) +
                             " draws");
}

}  // namespace star::evalab

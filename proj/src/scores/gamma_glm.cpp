#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "star/kernels.hpp"
#include "star/scores.hpp"

namespace star::scores {
namespace {

constexpr int kHalvingCap = 20;

struct Evaluation {
    double objective;
    bool feasible;
};

Evaluation evaluate(std::span<const double> x, std::size_t n, std::size_t m,
                    std::span<const double> y, double ridge, const Eigen::VectorXd& beta,
                    std::vector<double>& eta) {
    const auto& k = simd::kernels();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        eta[i] = k.dot(x.data() + i * m, beta.data(), m);
        if (!(eta[i] > 0.0)) return {-std::numeric_limits<double>::infinity(), false};
        obj += std::log(eta[i]) - y[i] * eta[i];
    }
    for (std::size_t j = 1; j < m; ++j) obj -= 0.5 * ridge * beta[j] * beta[j];
    return {obj, true};
}

}  // namespace

GlmResult fit_gamma_glm(std::span<const double> x, std::size_t n, std::size_t m,
                        std::span<const double> y, double ridge, std::span<const double> warm_beta,
                        int max_iter) {
    if (x.size() != n * m || y.size() != n) throw std::invalid_argument("glm: shape mismatch");
    if (n == 0 || m == 0) throw std::invalid_argument("glm: empty design");
    const auto& k = simd::kernels();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    std::vector<double> eta(n), w(n), r(n), ones(n, 1.0);
    bool started = false;
    if (warm_beta.size() == m) {
        for (std::size_t j = 0; j < m; ++j) beta[j] = warm_beta[j];
        started = evaluate(x, n, m, y, ridge, beta, eta).feasible;
    }
    if (!started) {
        double ybar = 0.0;
        for (double v : y) ybar += v;
        ybar = std::max(ybar / static_cast<double>(n), 1e-12);
        beta.setZero();
        beta[0] = 1.0 / ybar;
    }
    Evaluation cur = evaluate(x, n, m, y, ridge, beta, eta);
    GlmResult res;
    Eigen::MatrixXd gram(m, m);
    Eigen::VectorXd grad(m);
    std::vector<double> g(m);
    std::vector<double> cand_eta(n);
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double mu = 1.0 / eta[i];
            w[i] = mu * mu;
            r[i] = mu - y[i];
        }
        std::vector<double> upper(m * m, 0.0);
        k.weighted_gram(x.data(), w.data(), n, m, upper.data());
        std::fill(g.begin(), g.end(), 0.0);
        k.weighted_xty(x.data(), ones.data(), r.data(), n, m, g.data());
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a; b < m; ++b) gram(a, b) = gram(b, a) = upper[a * m + b];
            grad[a] = g[a];
        }
        for (std::size_t j = 1; j < m; ++j) {
            gram(j, j) += ridge;
            grad[j] -= ridge * beta[j];
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        Eigen::VectorXd step = ldlt.solve(grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            gram.diagonal().array() += 1e-10 * (1.0 + gram.diagonal().maxCoeff());
            step = gram.ldlt().solve(grad);
        }
        const double decrement = grad.dot(step);
        if (!(decrement > 1e-12 * (1.0 + std::abs(cur.objective)))) {
            res.converged = true;
            break;
        }
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= kHalvingCap; ++h, t *= 0.5) {
            Eigen::VectorXd trial = beta + t * step;
            const Evaluation e = evaluate(x, n, m, y, ridge, trial, cand_eta);
            if (e.feasible && e.objective >= cur.objective) {
                beta = std::move(trial);
                eta.swap(cand_eta);
                cur = e;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.degraded = true;
            break;
        }
    }
    res.beta.assign(beta.data(), beta.data() + m);
    res.mu.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.mu[i] = 1.0 / eta[i];
    return res;
}

}  // namespace star::scores

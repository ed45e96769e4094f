#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "star/kernels.hpp"
#include "star/scores.hpp"

namespace star::scores {

CgResult laplacian_solve(std::size_t n, const std::vector<std::pair<Id, Id>>& edges,
                         double lambda, std::span<const double> r, double tol, int max_iter) {
    if (r.size() != n) throw std::invalid_argument("laplacian: one response per node is required");
    if (!(lambda >= 0.0)) throw std::invalid_argument("laplacian: lambda must be non-negative");
    std::vector<std::pair<Id, Id>> und;
    und.reserve(2 * edges.size());
    for (auto [a, b] : edges) {
        if (a == b) continue;
        und.emplace_back(a, b);
        und.emplace_back(b, a);
    }
    std::sort(und.begin(), und.end());
    und.erase(std::unique(und.begin(), und.end()), und.end());
    std::vector<std::size_t> off(n + 1, 0);
    for (auto [a, b] : und) ++off[a + 1];
    for (std::size_t i = 0; i < n; ++i) off[i + 1] += off[i];
    std::vector<Id> nbr(und.size());
    for (std::size_t e = 0; e < und.size(); ++e) nbr[e] = und[e].second;

    auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = static_cast<double>(off[i + 1] - off[i]) * x[i];
            for (std::size_t e = off[i]; e < off[i + 1]; ++e) acc -= x[nbr[e]];
            out[i] = x[i] + lambda * acc;
        }
    };

    const auto& k = simd::kernels();
    CgResult res;
    res.x.assign(n, 0.0);
    const double rnorm = std::sqrt(k.dot(r.data(), r.data(), n));
    if (rnorm == 0.0) return res;
    if (max_iter <= 0) max_iter = static_cast<int>(std::max<std::size_t>(100, 10 * n));
    std::vector<double> resid(r.begin(), r.end());
    std::vector<double> dir = resid;
    std::vector<double> ad(n);
    double rr = k.dot(resid.data(), resid.data(), n);
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(rr) <= 0.1 * tol * rnorm) break;
        apply(dir, ad);
        const double a = rr / k.dot(dir.data(), ad.data(), n);
        k.axpy(a, dir.data(), res.x.data(), n);
        k.axpy(-a, ad.data(), resid.data(), n);
        const double rr_new = k.dot(resid.data(), resid.data(), n);
        k.xpby(resid.data(), rr_new / rr, dir.data(), n);
        rr = rr_new;
        res.iterations = it + 1;
    }
    apply(res.x, ad);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err += (ad[i] - r[i]) * (ad[i] - r[i]);
    res.residual = std::sqrt(err) / rnorm;
    if (!(res.residual <= tol))
        throw std::runtime_error("laplacian: conjugate gradients did not converge");
    return res;
}

}  // namespace star::scores

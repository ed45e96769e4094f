#include <algorithm>
#include <numeric>

#include "star/evalab.hpp"

namespace star::evalab {

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined state
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

IdSet bh(std::span<const double> p, double alpha) {
    const std::size_t n = p.size();
    std::vector<Id> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Id a, Id b) { return p[a] < p[b] || (p[a] == p[b] && a < b); });
    std::size_t k = 0;
    for (std::size_t i = n; i >= 1; --i) {
        if (p[order[i - 1]] <= alpha * static_cast<double>(i) / static_cast<double>(n)) {
            k = i;
            break;
        }
    }
    IdSet out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

double storey_pi0(std::span<const double> p, double lam) {
    std::size_t above = 0;
    for (double v : p) above += v > lam;
    return (1.0 + static_cast<double>(above)) / (static_cast<double>(p.size()) * (1.0 - lam));
}

IdSet storey_bh(std::span<const double> p, double alpha, double lam) {
    if (p.empty()) return {};
    return bh(p, alpha / storey_pi0(p, lam));
}

std::size_t fixed_order_accumulation(std::span<const double> p_in_order,
                                     const AccumulatorSpec& spec, double alpha) {
    std::vector<double> h(p_in_order.size());
    double total = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        h[i] = spec.h(p_in_order[i]);
        total += h[i];
    }
    for (std::size_t k = h.size(); k >= 1; --k) {
        if (spec.fdp_hat(total, k) <= alpha) return k;
        total -= h[k - 1];
    }
    return 0;
}

FdpPower fdp_power(std::span<const Id> rejected, const std::vector<char>& is_null) {
    std::size_t false_rej = 0;
    for (Id i : rejected) false_rej += is_null[i] != 0;
    std::size_t non_null = 0;
    for (char c : is_null) non_null += c == 0;
    const double r = static_cast<double>(rejected.size());
    FdpPower out{0.0, 0.0, rejected.size()};
    if (!rejected.empty()) out.fdp = static_cast<double>(false_rej) / r;
    if (non_null > 0)
        out.power = static_cast<double>(rejected.size() - false_rej) / static_cast<double>(non_null);
    return out;
}

}  // namespace star::evalab

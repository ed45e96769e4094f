#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "star/scores.hpp"

namespace star::scores {

std::vector<double> tree_isotonic(std::span<const Id> parent, std::span<const double> y) {
    const std::size_t n = parent.size();
    if (y.size() != n) throw std::invalid_argument("isotonic: one response per node is required");
    std::vector<Id> rep(n);
    std::iota(rep.begin(), rep.end(), 0);
    std::vector<double> sum(y.begin(), y.end());
    std::vector<double> count(n, 1.0);
    std::vector<int> version(n, 0);
    std::vector<char> final_block(n, 0);
    auto find = [&](Id v) {
        while (rep[v] != v) {
            rep[v] = rep[rep[v]];
            v = rep[v];
        }
        return v;
    };
    auto mean = [&](Id b) { return sum[b] / count[b]; };
    // Block ids are their top node, so the block's parent block is find(parent[b]).
    using Entry = std::tuple<double, Id, int>;
    auto cmp = [](const Entry& a, const Entry& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        return std::get<1>(a) > std::get<1>(b);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);
    for (std::size_t v = 0; v < n; ++v)
        if (parent[v] >= 0) heap.emplace(y[v], static_cast<Id>(v), 0);
    while (!heap.empty()) {
        const auto [m, b, ver] = heap.top();
        heap.pop();
        if (rep[b] != b || ver != version[b] || final_block[b]) continue;
        const Id p = find(parent[b]);
        if (mean(b) >= mean(p)) {
            rep[b] = p;
            sum[p] += sum[b];
            count[p] += count[b];
            ++version[p];
            if (parent[p] >= 0 && !final_block[p]) heap.emplace(mean(p), p, version[p]);
        } else {
            final_block[b] = 1;
        }
    }
    std::vector<double> out(n);
    for (std::size_t v = 0; v < n; ++v) out[v] = mean(find(static_cast<Id>(v)));
    return out;
}

}  // namespace star::scores

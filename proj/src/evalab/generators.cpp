#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "star/evalab.hpp"
#include "star/normal.hpp"

namespace star::evalab {
namespace {

constexpr std::size_t kGridSide = 50;
constexpr double kGridHalfWidth = 100.0;
constexpr std::size_t kTreeSize = 1000;
constexpr std::size_t kNonNulls = 50;
constexpr std::uint64_t kStructureSeed = 0x5EEDDA6ULL;

const std::pair<Scenario, const char*> kNames[] = {
    {Scenario::ConvexCircle, "convex_circle"}, {Scenario::ConvexEllipse, "convex_ellipse"},
    {Scenario::ConvexPolygon, "convex_polygon"}, {Scenario::TreeBfs, "tree_bfs"},
    {Scenario::TreeDfs, "tree_dfs"},           {Scenario::DagShallow, "dag_shallow"},
    {Scenario::DagDeep, "dag_deep"},           {Scenario::DagTriangular, "dag_triangular"},
    {Scenario::Unstructured, "unstructured"}};

bool in_shape(Scenario s, double x, double y) {
    switch (s) {
        case Scenario::ConvexCircle: return x * x + y * y <= 50.0 * 50.0;
        case Scenario::ConvexEllipse: {
            const double th = std::numbers::pi / 6.0;
            const double u = x * std::cos(th) + y * std::sin(th);
            const double v = -x * std::sin(th) + y * std::cos(th);
            return (u / 75.0) * (u / 75.0) + (v / 35.0) * (v / 35.0) <= 1.0;
        }
        case Scenario::ConvexPolygon: {
            static const double vx[] = {-70.0, 60.0, 40.0, -50.0};
            static const double vy[] = {-60.0, -40.0, 70.0, 50.0};
            for (int k = 0; k < 4; ++k) {
                const int j = (k + 1) % 4;
                const double cross = (vx[j] - vx[k]) * (y - vy[k]) - (vy[j] - vy[k]) * (x - vx[k]);
                if (cross < 0.0) return false;
            }
            return true;
        }
        default: return false;
    }
}

void grid_layout(const ExperimentConfig& cfg, Layout& out) {
    const std::size_t n = kGridSide * kGridSide;
    out.data.n = n;
    out.data.dim = 2;
    out.data.covariates.resize(2 * n);
    std::vector<double> xs(n), ys(n);
    out.is_null.assign(n, 1);
    out.mu.assign(n, 0.0);
    const double step = 2.0 * kGridHalfWidth / static_cast<double>(kGridSide - 1);
    for (std::size_t r = 0; r < kGridSide; ++r) {
        for (std::size_t c = 0; c < kGridSide; ++c) {
            const std::size_t i = r * kGridSide + c;
            xs[i] = -kGridHalfWidth + step * static_cast<double>(c);
            ys[i] = -kGridHalfWidth + step * static_cast<double>(r);
            out.data.covariates[2 * i] = xs[i];
            out.data.covariates[2 * i + 1] = ys[i];
            if (in_shape(cfg.scenario, xs[i], ys[i])) {
                out.is_null[i] = 0;
                out.mu[i] = cfg.mu;
            }
        }
    }
    out.fixed_order.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.fixed_order[i] = static_cast<Id>(i);
    std::stable_sort(out.fixed_order.begin(), out.fixed_order.end(), [&](Id a, Id b) {
        return xs[a] * xs[a] + ys[a] * ys[a] < xs[b] * xs[b] + ys[b] * ys[b];
    });
    out.constraint = ConstraintSpec::convex2d(std::move(xs), std::move(ys), cfg.delta, cfg.angles);
}

void set_depth_covariate(Layout& out, const std::vector<Id>& parent) {
    const std::size_t n = parent.size();
    out.data.n = n;
    out.data.dim = 1;
    out.data.covariates.assign(n, 0.0);
    // parents precede children in every generated structure
    for (std::size_t i = 0; i < n; ++i)
        if (parent[i] >= 0) out.data.covariates[i] = out.data.covariates[parent[i]] + 1.0;
}

void tree_layout(const ExperimentConfig& cfg, Layout& out) {
    if (cfg.tree_case < 1 || cfg.tree_case > 3)
        throw std::invalid_argument("tree case must be 1, 2 or 3");
    std::vector<Id> parent = heap_tree_parents(kTreeSize);
    set_depth_covariate(out, parent);
    std::vector<Id> order;
    if (cfg.scenario == Scenario::TreeBfs) {
        order.resize(kTreeSize);
        for (std::size_t i = 0; i < kTreeSize; ++i) order[i] = static_cast<Id>(i);
    } else {
        order = preorder(parent);
    }
    out.is_null.assign(kTreeSize, 1);
    out.mu.assign(kTreeSize, 0.0);
    for (std::size_t k = 0; k < kNonNulls; ++k) {
        const Id v = order[k];
        out.is_null[v] = 0;
        const bool first_half = k < kNonNulls / 2;
        switch (cfg.tree_case) {
            case 1: out.mu[v] = cfg.mu; break;
            case 2: out.mu[v] = first_half ? 2.5 : 1.5; break;
            case 3: out.mu[v] = first_half ? 1.5 : 2.5; break;
        }
    }
    out.fixed_order = std::move(order);
    out.constraint = ConstraintSpec::tree(std::move(parent));
}

void dag_layout(const ExperimentConfig& cfg, Layout& out) {
    std::vector<std::size_t> layers;
    switch (cfg.scenario) {
        case Scenario::DagShallow: layers.assign(4, 250); break;
        case Scenario::DagDeep: layers.assign(10, 100); break;
        default: layers = {50, 100, 200, 300, 350}; break;
    }
    Rng rng(kStructureSeed + static_cast<std::uint64_t>(cfg.scenario));
    std::size_t n = 0;
    for (auto s : layers) n += s;
    std::vector<std::pair<Id, Id>> edges;
    std::vector<std::vector<Id>> parents(n);
    std::vector<int> layer_of(n);
    std::size_t prev_begin = 0, begin = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t k = 0; k < layers[l]; ++k) {
            const Id v = static_cast<Id>(begin + k);
            layer_of[v] = static_cast<int>(l);
            if (l == 0) continue;
            const std::size_t width = layers[l - 1];
            std::uniform_int_distribution<std::size_t> pick(0, width - 1);
            const Id a = static_cast<Id>(prev_begin + pick(rng));
            Id b = a;
            while (width > 1 && b == a) b = static_cast<Id>(prev_begin + pick(rng));
            for (Id p : {a, b}) {
                if (!parents[v].empty() && parents[v][0] == p) continue;
                parents[v].push_back(p);
                edges.emplace_back(p, v);
            }
        }
        prev_begin = begin;
        begin += layers[l];
    }
    std::vector<Id> first_parent(n, -1);
    for (std::size_t v = 0; v < n; ++v)
        if (!parents[v].empty()) first_parent[v] = parents[v][0];
    set_depth_covariate(out, first_parent);

    // grow a strong-heredity closed signal set, favouring deeper nodes
    std::vector<std::vector<Id>> children(n);
    for (const auto& [p, c] : edges) children[p].push_back(c);
    std::vector<char> selected(n, 0);
    std::vector<Id> pool;
    for (std::size_t v = 0; v < layers[0]; ++v) pool.push_back(static_cast<Id>(v));
    std::vector<Id> chosen;
    while (chosen.size() < kNonNulls && !pool.empty()) {
        double total = 0.0;
        for (Id v : pool) total += layer_of[v] + 1.0;
        double u = std::uniform_real_distribution<double>(0.0, total)(rng);
        std::size_t pos = 0;
        for (; pos + 1 < pool.size(); ++pos) {
            u -= layer_of[pool[pos]] + 1.0;
            if (u < 0.0) break;
        }
        const Id v = pool[pos];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pos));
        selected[v] = 1;
        chosen.push_back(v);
        for (Id c : children[v]) {
            bool ready = !selected[c];
            for (Id p : parents[c]) ready = ready && selected[p];
            if (ready && std::find(pool.begin(), pool.end(), c) == pool.end()) pool.push_back(c);
        }
    }
    out.is_null.assign(n, 1);
    out.mu.assign(n, 0.0);
    for (Id v : chosen) {
        out.is_null[v] = 0;
        out.mu[v] = cfg.mu;
    }
    out.fixed_order.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.fixed_order[i] = static_cast<Id>(i);
    out.constraint = ConstraintSpec::dag(n, edges, true);
}

void unstructured_layout(const ExperimentConfig& cfg, Layout& out) {
    const std::size_t n = cfg.n;
    if (n == 0) throw std::invalid_argument("unstructured scenario needs n >= 1");
    out.data.n = n;
    out.data.dim = 1;
    out.data.covariates.resize(n);
    const auto signals = static_cast<std::size_t>(std::llround(cfg.pi1 * static_cast<double>(n)));
    out.is_null.assign(n, 1);
    out.mu.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.data.covariates[i] = static_cast<double>(i) / static_cast<double>(n);
        if (i < signals) {
            out.is_null[i] = 0;
            out.mu[i] = cfg.mu;
        }
    }
    out.fixed_order.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.fixed_order[i] = static_cast<Id>(i);
    out.constraint = ConstraintSpec::none(n);
}

}  // namespace

std::string to_string(Scenario s) {
    for (const auto& [k, name] : kNames)
        if (k == s) return name;
    return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
    for (const auto& [k, name] : kNames)
        if (s == name) return k;
    throw std::invalid_argument("unknown scenario '" + s + "'");
}

std::vector<Id> heap_tree_parents(std::size_t n) {
    std::vector<Id> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i == 0 ? -1 : static_cast<Id>((i - 1) / 2);
    return parent;
}

std::vector<Id> preorder(std::span<const Id> parent) {
    const std::size_t n = parent.size();
    std::vector<std::vector<Id>> children(n);
    Id root = -1;
    for (std::size_t i = 0; i < n; ++i) {
        if (parent[i] < 0)
            root = static_cast<Id>(i);
        else
            children[parent[i]].push_back(static_cast<Id>(i));
    }
    std::vector<Id> out;
    if (root < 0) return out;
    out.reserve(n);
    std::vector<Id> stack{root};
    while (!stack.empty()) {
        const Id v = stack.back();
        stack.pop_back();
        out.push_back(v);
        for (auto it = children[v].rbegin(); it != children[v].rend(); ++it) stack.push_back(*it);
    }
    return out;
}

Layout make_layout(const ExperimentConfig& cfg) {
    Layout out;
    switch (cfg.scenario) {
        case Scenario::ConvexCircle:
        case Scenario::ConvexEllipse:
        case Scenario::ConvexPolygon: grid_layout(cfg, out); break;
        case Scenario::TreeBfs:
        case Scenario::TreeDfs: tree_layout(cfg, out); break;
        case Scenario::DagShallow:
        case Scenario::DagDeep:
        case Scenario::DagTriangular: dag_layout(cfg, out); break;
        case Scenario::Unstructured: unstructured_layout(cfg, out); break;
    }
    return out;
}

std::vector<double> gen_correlated_z(std::span<const double> mu, double rho, Rng& rng) {
    const std::size_t n = mu.size();
    if (n > 1 && !(rho > -1.0 / static_cast<double>(n - 1) && rho < 1.0))
        throw std::invalid_argument("rho is outside the positive-definite range");
    std::normal_distribution<double> norm;
    std::vector<double> g(n);
    for (auto& v : g) v = norm(rng);
    std::vector<double> z(n);
    if (rho >= 0.0) {
        const double s = rho > 0.0 ? norm(rng) : 0.0;
        const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
        for (std::size_t i = 0; i < n; ++i) z[i] = mu[i] + a * s + b * g[i];
        return z;
    }
    // g - kappa * mean(g) has off-diagonal -c/n and variance 1 - c/n with c = 2 kappa - kappa^2
    const double nd = static_cast<double>(n);
    const double c = -rho * nd / (1.0 - rho);
    const double kappa = 1.0 - std::sqrt(1.0 - c);
    const double scale = 1.0 / std::sqrt(1.0 - c / nd);
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= nd;
    for (std::size_t i = 0; i < n; ++i) z[i] = mu[i] + scale * (g[i] - kappa * mean);
    return z;
}

void draw_pvalues(const Layout& layout, double rho, Rng& rng, Dataset& out, std::vector<double>& z) {
    z = gen_correlated_z(layout.mu, rho, rng);
    out.n = layout.data.n;
    out.dim = layout.data.dim;
    if (out.covariates.size() != layout.data.covariates.size()) out.covariates = layout.data.covariates;
    out.p.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out.p[i] = stats::normal_sf(z[i]);
}

Instance gen_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    Instance inst;
    inst.layout = make_layout(cfg);
    Rng rng(seed);
    draw_pvalues(inst.layout, cfg.rho, rng, inst.layout.data, inst.z);
    return inst;
}

}  // namespace star::evalab

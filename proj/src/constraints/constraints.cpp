#include "star/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "star/kernels.hpp"

namespace star::constraints {
namespace {

void require_kind(const ConstraintSpec& c, std::initializer_list<Kind> kinds, const char* op) {
    for (Kind k : kinds)
        if (c.kind() == k) return;
    throw StructureError(std::string(op) + ": constraint kind is " + to_string(c.kind()));
}

void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw StructureError("delta must lie in (0,1)");
}

void require_member(const ConstraintSpec& c, std::span<const Id> set, const char* op) {
    if (!in_constraint(c, set)) throw StructureError(std::string(op) + ": set is not in K");
}

CandidateList singletons(std::span<const Id> ids) {
    CandidateList out;
    out.reserve(ids.size(), ids.size());
    for (Id v : ids) out.push_singleton(v);
    return out;
}

}  // namespace

std::string to_string(Kind k) {
    switch (k) {
        case Kind::None: return "none";
        case Kind::Convex2d: return "convex2d";
        case Kind::AxisBox: return "axisbox";
        case Kind::Tree: return "tree";
        case Kind::DagStrong: return "dag_strong";
        case Kind::DagWeak: return "dag_weak";
    }
    return "none";
}

Kind kind_from_string(const std::string& s) {
    if (s == "none") return Kind::None;
    if (s == "convex2d") return Kind::Convex2d;
    if (s == "axisbox") return Kind::AxisBox;
    if (s == "tree") return Kind::Tree;
    if (s == "dag_strong") return Kind::DagStrong;
    if (s == "dag_weak") return Kind::DagWeak;
    throw StructureError("unknown constraint kind '" + s + "'");
}

ConstraintSpec ConstraintSpec::none(std::size_t n) {
    ConstraintSpec c;
    c.kind_ = Kind::None;
    c.n_ = n;
    return c;
}

ConstraintSpec ConstraintSpec::convex2d(std::vector<double> xs, std::vector<double> ys,
                                        double delta, int angles) {
    if (xs.size() != ys.size()) throw StructureError("convex2d: xs and ys differ in length");
    check_delta(delta);
    if (angles < 1) throw StructureError("convex2d: angles must be positive");
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw StructureError("convex2d: non-finite coordinate at id " + std::to_string(i));
    ConstraintSpec c;
    c.kind_ = Kind::Convex2d;
    c.n_ = xs.size();
    c.delta_ = delta;
    c.angles_ = angles;
    c.dim_ = 2;
    c.xs_ = std::move(xs);
    c.ys_ = std::move(ys);
    return c;
}

ConstraintSpec ConstraintSpec::axis_box(std::size_t n, std::size_t dim, std::vector<double> coords,
                                        double delta) {
    if (dim < 1) throw StructureError("axisbox: dimension must be positive");
    if (coords.size() != n * dim) throw StructureError("axisbox: coordinate array has wrong size");
    check_delta(delta);
    for (double v : coords)
        if (!std::isfinite(v)) throw StructureError("axisbox: non-finite coordinate");
    ConstraintSpec c;
    c.kind_ = Kind::AxisBox;
    c.n_ = n;
    c.dim_ = dim;
    c.delta_ = delta;
    c.coords_ = std::move(coords);
    return c;
}

ConstraintSpec ConstraintSpec::tree(std::vector<Id> parent) {
    const std::size_t n = parent.size();
    std::vector<std::pair<Id, Id>> edges;
    Id root = -1;
    for (std::size_t i = 0; i < n; ++i) {
        const Id p = parent[i];
        if (p == -1) {
            if (root != -1)
                throw StructureError("tree: more than one root (ids " + std::to_string(root) +
                                     " and " + std::to_string(i) + ")");
            root = static_cast<Id>(i);
        } else if (p < 0 || static_cast<std::size_t>(p) >= n) {
            throw StructureError("tree: parent of id " + std::to_string(i) + " is out of range");
        } else if (static_cast<std::size_t>(p) == i) {
            throw StructureError("tree: id " + std::to_string(i) + " is its own parent");
        } else {
            edges.emplace_back(p, static_cast<Id>(i));
        }
    }
    if (n > 0 && root == -1) throw StructureError("tree: no root");
    ConstraintSpec c;
    c.kind_ = Kind::Tree;
    c.n_ = n;
    c.tree_parent_ = std::move(parent);
    c.build_adjacency(edges);
    // Everything must be reachable from the root; with n-1 arcs that rules out cycles.
    if (n > 0) {
        std::vector<char> seen(n, 0);
        std::vector<Id> stack{root};
        seen[root] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const Id v = stack.back();
            stack.pop_back();
            for (Id ch : c.children(v)) {
                if (!seen[ch]) {
                    seen[ch] = 1;
                    ++count;
                    stack.push_back(ch);
                }
            }
        }
        if (count != n) throw StructureError("tree: parent pointers contain a cycle");
    }
    return c;
}

ConstraintSpec ConstraintSpec::dag(std::size_t n, const std::vector<std::pair<Id, Id>>& edges,
                                   bool strong) {
    std::vector<std::pair<Id, Id>> arcs;
    arcs.reserve(edges.size());
    for (const auto& [p, ch] : edges) {
        if (p < 0 || ch < 0 || static_cast<std::size_t>(p) >= n ||
            static_cast<std::size_t>(ch) >= n)
            throw StructureError("dag: edge (" + std::to_string(p) + "," + std::to_string(ch) +
                                 ") references an id out of range");
        if (p == ch) throw StructureError("dag: self loop at id " + std::to_string(p));
        arcs.emplace_back(p, ch);
    }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
    ConstraintSpec c;
    c.kind_ = strong ? Kind::DagStrong : Kind::DagWeak;
    c.n_ = n;
    c.build_adjacency(arcs);
    std::vector<std::size_t> indeg(n);
    for (std::size_t v = 0; v < n; ++v) indeg[v] = c.parents(static_cast<Id>(v)).size();
    std::vector<Id> queue(c.roots_.begin(), c.roots_.end());
    std::size_t visited = 0;
    while (!queue.empty()) {
        const Id v = queue.back();
        queue.pop_back();
        ++visited;
        for (Id ch : c.children(v))
            if (--indeg[ch] == 0) queue.push_back(ch);
    }
    if (visited != n) throw StructureError("dag: graph contains a cycle");
    return c;
}

void ConstraintSpec::build_adjacency(const std::vector<std::pair<Id, Id>>& edges) {
    child_offsets_.assign(n_ + 1, 0);
    parent_offsets_.assign(n_ + 1, 0);
    for (const auto& [p, ch] : edges) {
        ++child_offsets_[p + 1];
        ++parent_offsets_[ch + 1];
    }
    std::partial_sum(child_offsets_.begin(), child_offsets_.end(), child_offsets_.begin());
    std::partial_sum(parent_offsets_.begin(), parent_offsets_.end(), parent_offsets_.begin());
    child_ids_.resize(edges.size());
    parent_ids_.resize(edges.size());
    std::vector<std::size_t> cf(child_offsets_.begin(), child_offsets_.end() - 1);
    std::vector<std::size_t> pf(parent_offsets_.begin(), parent_offsets_.end() - 1);
    for (const auto& [p, ch] : edges) {
        child_ids_[cf[p]++] = ch;
        parent_ids_[pf[ch]++] = p;
    }
    for (std::size_t v = 0; v < n_; ++v) {
        std::sort(child_ids_.begin() + child_offsets_[v], child_ids_.begin() + child_offsets_[v + 1]);
        std::sort(parent_ids_.begin() + parent_offsets_[v],
                  parent_ids_.begin() + parent_offsets_[v + 1]);
    }
    roots_.clear();
    for (std::size_t v = 0; v < n_; ++v)
        if (parent_offsets_[v] == parent_offsets_[v + 1]) roots_.push_back(static_cast<Id>(v));
}

std::span<const Id> ConstraintSpec::children(Id v) const {
    if (child_offsets_.empty()) return {};
    return {child_ids_.data() + child_offsets_[v], child_offsets_[v + 1] - child_offsets_[v]};
}

std::span<const Id> ConstraintSpec::parents(Id v) const {
    if (parent_offsets_.empty()) return {};
    return {parent_ids_.data() + parent_offsets_[v], parent_offsets_[v + 1] - parent_offsets_[v]};
}

std::vector<std::pair<Id, Id>> ConstraintSpec::edges() const {
    std::vector<std::pair<Id, Id>> out;
    if (child_offsets_.empty()) return out;
    for (std::size_t v = 0; v < n_; ++v)
        for (Id ch : children(static_cast<Id>(v))) out.emplace_back(static_cast<Id>(v), ch);
    return out;
}

Membership membership_of(std::size_t n, std::span<const Id> set) {
    Membership m(n, 0);
    for (Id v : set) {
        if (v < 0 || static_cast<std::size_t>(v) >= n)
            throw std::out_of_range("id " + std::to_string(v) + " is out of range");
        m[v] = 1;
    }
    return m;
}

bool in_constraint(const ConstraintSpec& c, std::span<const Id> set) {
    return in_constraint(c, membership_of(c.size(), set));
}

bool in_constraint(const ConstraintSpec& c, const Membership& member) {
    const std::size_t n = c.size();
    if (member.size() != n) throw std::invalid_argument("membership has wrong length");
    switch (c.kind()) {
        case Kind::None: return true;
        case Kind::Tree: {
            for (std::size_t v = 0; v < n; ++v) {
                if (!member[v]) continue;
                const Id p = c.parent_of(static_cast<Id>(v));
                if (p != -1 && !member[p]) return false;
            }
            return true;
        }
        case Kind::DagStrong:
            for (std::size_t v = 0; v < n; ++v) {
                if (!member[v]) continue;
                for (Id p : c.parents(static_cast<Id>(v)))
                    if (!member[p]) return false;
            }
            return true;
        case Kind::DagWeak:
            for (std::size_t v = 0; v < n; ++v) {
                if (!member[v]) continue;
                auto ps = c.parents(static_cast<Id>(v));
                if (ps.empty()) continue;
                if (std::none_of(ps.begin(), ps.end(), [&](Id p) { return member[p] != 0; }))
                    return false;
            }
            return true;
        case Kind::AxisBox: {
            const std::size_t d = c.dim();
            auto x = c.coords();
            std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
            bool any = false;
            for (std::size_t v = 0; v < n; ++v) {
                if (!member[v]) continue;
                any = true;
                for (std::size_t j = 0; j < d; ++j) {
                    lo[j] = std::min(lo[j], x[v * d + j]);
                    hi[j] = std::max(hi[j], x[v * d + j]);
                }
            }
            if (!any) return true;
            for (std::size_t v = 0; v < n; ++v) {
                if (member[v]) continue;
                bool inside = true;
                for (std::size_t j = 0; j < d && inside; ++j)
                    inside = x[v * d + j] >= lo[j] && x[v * d + j] <= hi[j];
                if (inside) return false;
            }
            return true;
        }
        case Kind::Convex2d: {
            std::vector<geometry::Point> pts;
            for (std::size_t v = 0; v < n; ++v)
                if (member[v]) pts.push_back({c.xs()[v], c.ys()[v]});
            const auto hull = geometry::convex_hull(std::move(pts));
            if (hull.size() < 3) return true;
            for (std::size_t v = 0; v < n; ++v)
                if (!member[v] && geometry::strictly_inside(hull, {c.xs()[v], c.ys()[v]}, 1e-9))
                    return false;
            return true;
        }
    }
    return true;
}

std::size_t peel_count(double delta, std::size_t size) {
    if (size == 0) return 0;
    const double raw = std::ceil(delta * static_cast<double>(size) - 1e-12);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, size);
}

std::pair<double, double> probe_direction(int k, int angles) {
    if ((4 * static_cast<long>(k)) % angles == 0) {
        switch (((4 * static_cast<long>(k)) / angles) % 4) {
            case 0: return {1.0, 0.0};
            case 1: return {0.0, 1.0};
            case 2: return {-1.0, 0.0};
            default: return {0.0, -1.0};
        }
    }
    const double theta = 2.0 * std::numbers::pi * k / angles;
    return {std::cos(theta), std::sin(theta)};
}

CandidateList candidates(const ConstraintSpec& c, std::span<const Id> set,
                              bool check_member) {
    switch (c.kind()) {
        case Kind::None: return candidates_none(c, set);
        case Kind::Convex2d: return candidates_convex(c, set);
        case Kind::AxisBox: return candidates_box(c, set);
        case Kind::Tree: return candidates_tree(c, set, check_member);
        case Kind::DagStrong:
        case Kind::DagWeak: return candidates_dag(c, set, check_member);
    }
    return {};
}

CandidateList candidates_none(const ConstraintSpec& c, std::span<const Id> set) {
    require_kind(c, {Kind::None}, "candidates_none");
    membership_of(c.size(), set);
    return singletons(set);
}

CandidateList candidates_convex(const ConstraintSpec& c, std::span<const Id> set) {
    require_kind(c, {Kind::Convex2d}, "candidates_convex");
    membership_of(c.size(), set);
    const std::size_t m = set.size();
    if (m == 0) return {};
    std::vector<double> xs(m), ys(m), proj(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = c.xs()[set[i]];
        ys[i] = c.ys()[set[i]];
    }
    const std::size_t k = peel_count(c.delta(), m);
    const auto& kt = simd::kernels();
    CandidateList out;
    std::set<IdSet> seen;
    std::vector<std::size_t> order(m);
    for (int a = 0; a < c.angles(); ++a) {
        const auto [cs, sn] = probe_direction(a, c.angles());
        kt.project2d(xs.data(), ys.data(), cs, sn, proj.data(), m);
        std::iota(order.begin(), order.end(), 0);
        auto before = [&](std::size_t i, std::size_t j) {
            return proj[i] > proj[j] || (proj[i] == proj[j] && set[i] < set[j]);
        };
        if (k < m) std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), before);
        IdSet cand;
        cand.reserve(k);
        for (std::size_t i = 0; i < k; ++i) cand.push_back(set[order[i]]);
        std::sort(cand.begin(), cand.end());
        if (seen.insert(cand).second) out.push_back(cand);
    }
    return out;
}

CandidateList candidates_box(const ConstraintSpec& c, std::span<const Id> set) {
    require_kind(c, {Kind::AxisBox}, "candidates_box");
    membership_of(c.size(), set);
    const std::size_t m = set.size();
    if (m == 0) return {};
    const std::size_t d = c.dim();
    const std::size_t k = peel_count(c.delta(), m);
    auto x = c.coords();
    std::vector<double> vals(m);
    CandidateList out;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < m; ++i) vals[i] = x[set[i] * d + j];
        std::vector<double> sorted = vals;
        std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
        const double vlo = sorted[k - 1];
        std::nth_element(sorted.begin(), sorted.begin() + (m - k), sorted.end());
        const double vhi = sorted[m - k];
        IdSet low, high;
        for (std::size_t i = 0; i < m; ++i) {
            if (vals[i] <= vlo) low.push_back(set[i]);
            if (vals[i] >= vhi) high.push_back(set[i]);
        }
        out.push_back(low);
        out.push_back(high);
    }
    return out;
}

CandidateList candidates_tree(const ConstraintSpec& c, std::span<const Id> set,
                                   bool check_member) {
    require_kind(c, {Kind::Tree}, "candidates_tree");
    if (check_member) require_member(c, set, "candidates_tree");
    const Membership member = membership_of(c.size(), set);
    CandidateList out;
    for (Id v : set) {
        auto ch = c.children(v);
        if (std::none_of(ch.begin(), ch.end(), [&](Id u) { return member[u] != 0; }))
            out.push_singleton(v);
    }
    return out;
}

CandidateList candidates_dag(const ConstraintSpec& c, std::span<const Id> set,
                                  bool check_member) {
    require_kind(c, {Kind::DagStrong, Kind::DagWeak}, "candidates_dag");
    if (check_member) require_member(c, set, "candidates_dag");
    const Membership member = membership_of(c.size(), set);
    CandidateList out;
    if (c.kind() == Kind::DagStrong) {
        for (Id v : set) {
            auto ch = c.children(v);
            if (std::none_of(ch.begin(), ch.end(), [&](Id u) { return member[u] != 0; }))
                out.push_singleton(v);
        }
        return out;
    }
    std::vector<int> live_parents(c.size(), 0);
    for (Id v : set)
        for (Id p : c.parents(v)) live_parents[v] += member[p] ? 1 : 0;
    for (Id v : set) {
        auto ch = c.children(v);
        if (std::all_of(ch.begin(), ch.end(),
                        [&](Id u) { return !member[u] || live_parents[u] >= 2; }))
            out.push_singleton(v);
    }
    return out;
}

}  // namespace star::constraints

#include <algorithm>

#include "star/engine.hpp"

namespace star::engine {
namespace {

using nlohmann::json;

json history_to_json(const HistoryLog& history) {
    json out = json::array();
    for (std::size_t k = 0; k < history.size(); ++k) {
        const HistoryEntry& e = history[k];
        out.push_back({{"step", e.step},
                       {"removed", e.removed},
                       {"fdp_hat", e.fdp_hat},
                       {"in_constraint", e.in_constraint}});
    }
    return out;
}

json covariates_to_json(const Dataset& d) {
    json rows = json::array();
    for (std::size_t i = 0; i < d.n; ++i) {
        auto x = d.covariate(static_cast<Id>(i));
        rows.push_back(std::vector<double>(x.begin(), x.end()));
    }
    return rows;
}

const json& field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw ValidationError(path + "." + key + ": missing");
    return j.at(key);
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ValidationError(path + ": expected a number");
    return j.get<double>();
}

Id id_value(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ValidationError(path + ": expected an integer id");
    return j.get<Id>();
}

}  // namespace

json view_to_json(const AnalystView& v) {
    json masked = json::array();
    json revealed = json::array();
    for (std::size_t i = 0; i < v.n; ++i) {
        if (v.is_masked(static_cast<Id>(i))) masked.push_back({{"id", i}, {"g", v.masked_g[i]}});
        if (v.is_revealed(static_cast<Id>(i)))
            revealed.push_back({{"id", i}, {"p", v.revealed_p[i]}});
    }
    json out = {{"v", kSchemaVersion},
                {"n", v.n},
                {"step", v.step},
                {"alpha", v.alpha},
                {"sum_h", v.sum_h},
                {"fdp_hat", v.fdp_hat},
                {"h_max", v.spec->h_max()},
                {"in_constraint", v.in_constraint},
                {"halted", v.halted},
                {"disclosed", v.disclosed},
                {"masked", std::move(masked)},
                {"revealed", std::move(revealed)},
                {"covariates", covariates_to_json(*v.public_data)},
                {"candidates", v.candidates.to_sets()},
                {"history", history_to_json(v.history)},
                {"accum", *v.spec},
                {"constraint", constraint_to_json(*v.constraint)}};
    if (v.halted) out["rejection"] = v.current;
    return out;
}

json constraint_to_json(const ConstraintSpec& c) {
    using constraints::Kind;
    json j = {{"kind", constraints::to_string(c.kind())}};
    switch (c.kind()) {
        case Kind::None: break;
        case Kind::Convex2d:
            j["delta"] = c.delta();
            j["angles"] = c.angles();
            break;
        case Kind::AxisBox: j["delta"] = c.delta(); break;
        case Kind::Tree: {
            json parent = json::array();
            for (std::size_t v = 0; v < c.size(); ++v) {
                const Id p = c.parent_of(static_cast<Id>(v));
                if (p < 0)
                    parent.push_back(nullptr);
                else
                    parent.push_back(p);
            }
            j["parent"] = std::move(parent);
            break;
        }
        case Kind::DagStrong:
        case Kind::DagWeak: {
            json edges = json::array();
            for (const auto& [p, ch] : c.edges()) edges.push_back({p, ch});
            j["edges"] = std::move(edges);
            break;
        }
    }
    return j;
}

ConstraintSpec constraint_from_json(const json& j, const Dataset& data) {
    using constraints::Kind;
    const std::string path = "constraint";
    if (j.is_null()) return ConstraintSpec::none(data.n);
    if (!j.is_object()) throw ValidationError(path + ": expected an object");
    const json& kind_j = field(j, "kind", path);
    if (!kind_j.is_string()) throw ValidationError(path + ".kind: expected a string");
    Kind kind;
    try {
        kind = constraints::kind_from_string(kind_j.get<std::string>());
    } catch (const std::exception& e) {
        throw ValidationError(path + ".kind: " + e.what());
    }
    const double delta =
        j.contains("delta") && !j["delta"].is_null() ? number(j["delta"], path + ".delta")
                                                     : constraints::kDefaultDelta;
    try {
        switch (kind) {
            case Kind::None: return ConstraintSpec::none(data.n);
            case Kind::Convex2d: {
                if (data.dim < 2)
                    throw ValidationError(path + ": convex2d needs two covariate columns");
                int angles = constraints::kDefaultAngles;
                if (j.contains("angles") && !j["angles"].is_null()) {
                    if (!j["angles"].is_number_integer())
                        throw ValidationError(path + ".angles: expected an integer");
                    angles = j["angles"].get<int>();
                }
                std::vector<double> xs(data.n), ys(data.n);
                for (std::size_t i = 0; i < data.n; ++i) {
                    xs[i] = data.covariates[i * data.dim];
                    ys[i] = data.covariates[i * data.dim + 1];
                }
                return ConstraintSpec::convex2d(std::move(xs), std::move(ys), delta, angles);
            }
            case Kind::AxisBox:
                if (data.dim < 1) throw ValidationError(path + ": axisbox needs covariates");
                return ConstraintSpec::axis_box(data.n, data.dim, data.covariates, delta);
            case Kind::Tree: {
                const json& pj = field(j, "parent", path);
                if (!pj.is_array()) throw ValidationError(path + ".parent: expected an array");
                std::vector<Id> parent;
                parent.reserve(pj.size());
                for (std::size_t i = 0; i < pj.size(); ++i) {
                    if (pj[i].is_null())
                        parent.push_back(-1);
                    else
                        parent.push_back(
                            id_value(pj[i], path + ".parent[" + std::to_string(i) + "]"));
                }
                return ConstraintSpec::tree(std::move(parent));
            }
            case Kind::DagStrong:
            case Kind::DagWeak: {
                const json& ej = field(j, "edges", path);
                if (!ej.is_array()) throw ValidationError(path + ".edges: expected an array");
                std::vector<std::pair<Id, Id>> edges;
                for (std::size_t i = 0; i < ej.size(); ++i) {
                    const std::string ep = path + ".edges[" + std::to_string(i) + "]";
                    if (!ej[i].is_array() || ej[i].size() != 2)
                        throw ValidationError(ep + ": expected [parent, child]");
                    edges.emplace_back(id_value(ej[i][0], ep + "[0]"),
                                       id_value(ej[i][1], ep + "[1]"));
                }
                return ConstraintSpec::dag(data.n, edges, kind == Kind::DagStrong);
            }
        }
    } catch (const constraints::StructureError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return ConstraintSpec::none(data.n);
}

json snapshot_to_json(const Session& s, bool include_oracle) {
    json j = {{"v", kSchemaVersion},
              {"n", s.n()},
              {"dim", s.data().dim},
              {"covariates", covariates_to_json(s.data())},
              {"accum", s.spec()},
              {"constraint", constraint_to_json(s.constraint())},
              {"alpha", s.alpha()},
              {"seed", s.seed()},
              {"disclose_on_halt", s.disclose_on_halt()},
              {"step", s.step()},
              {"halted", s.halted()},
              {"current", s.current()},
              {"history", history_to_json(s.history())}};
    if (include_oracle) j["oracle"] = {{"p", s.data().p}};
    return j;
}

Session session_from_snapshot(const json& j) {
    const std::string path = "snapshot";
    if (!j.is_object()) throw ValidationError(path + ": expected an object");
    if (field(j, "v", path) != kSchemaVersion)
        throw ValidationError(path + ".v: unsupported schema version");
    const json& oracle = field(j, "oracle", path);
    Dataset d;
    d.p = field(oracle, "p", path + ".oracle").get<std::vector<double>>();
    d.n = d.p.size();
    d.dim = field(j, "dim", path).get<std::size_t>();
    const json& cov = field(j, "covariates", path);
    if (!cov.is_array() || cov.size() != d.n)
        throw ValidationError(path + ".covariates: expected one row per hypothesis");
    for (const auto& row : cov) {
        auto r = row.get<std::vector<double>>();
        if (r.size() != d.dim) throw ValidationError(path + ".covariates: ragged row");
        d.covariates.insert(d.covariates.end(), r.begin(), r.end());
    }
    AccumulatorSpec spec = [&] {
        try {
            return accum::accumulator_from_json(field(j, "accum", path));
        } catch (const ValidationError&) {
            throw;
        } catch (const std::exception& e) {
            throw ValidationError(path + ".accum: " + e.what());
        }
    }();
    ConstraintSpec c = constraint_from_json(field(j, "constraint", path), d);
    const double alpha = number(field(j, "alpha", path), path + ".alpha");
    const auto seed = field(j, "seed", path).get<std::uint64_t>();
    const bool disclose = j.value("disclose_on_halt", true);
    Session s(std::move(d), std::move(spec), std::move(c), alpha, seed, disclose);
    const json& hist = field(j, "history", path);
    for (std::size_t k = 1; k < hist.size(); ++k) {
        auto removed = field(hist[k], "removed", path + ".history").get<IdSet>();
        s.peel(removed);
    }
    if (s.step() != field(j, "step", path).get<std::size_t>())
        throw ValidationError(path + ".step: does not match the replayed history");
    return s;
}

}  // namespace star::engine

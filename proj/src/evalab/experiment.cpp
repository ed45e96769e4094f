#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include "star/evalab.hpp"

namespace star::evalab {
namespace {

using nlohmann::json;
using engine::ValidationError;

const char* const kMethods[] = {"star_canonical", "star_beta_gam", "star_isotonic",
                                "star_laplacian", "bh",            "storey_bh",
                                "fixed_order"};

bool known_method(const std::string& m) {
    return std::find(std::begin(kMethods), std::end(kMethods), m) != std::end(kMethods);
}

std::unique_ptr<engine::UpdateRule> star_rule(const std::string& method, const ExperimentConfig& cfg) {
    scores::ScoreConfig sc = cfg.score;
    if (method == "star_canonical") sc.kind = "canonical";
    if (method == "star_beta_gam") sc.kind = "beta_gam";
    if (method == "star_isotonic") sc.kind = "gauss_isotonic";
    if (method == "star_laplacian") sc.kind = "gauss_laplacian";
    return scores::make_rule(sc);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config.") + key + ": wrong type");
    }
}

}  // namespace

std::vector<double> ExperimentConfig::default_alpha_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 30; ++k) g.push_back(k / 100.0);
    return g;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config: expected an object");
    ExperimentConfig c;
    try {
        c.scenario = scenario_from_string(get_or<std::string>(j, "scenario", "convex_circle"));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("config.scenario: ") + e.what());
    }
    c.tree_case = get_or(j, "case", 1);
    c.alpha_grid = get_or(j, "alpha_grid", ExperimentConfig::default_alpha_grid());
    c.replicates = get_or(j, "replicates", 100);
    c.rho = get_or(j, "rho", 0.0);
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.methods = get_or(j, "methods", c.methods);
    c.mu = get_or(j, "mu", c.mu);
    c.n = get_or<std::size_t>(j, "n", c.n);
    c.pi1 = get_or(j, "pi1", c.pi1);
    c.delta = get_or(j, "delta", c.delta);
    c.angles = get_or(j, "angles", c.angles);
    c.threads = get_or(j, "threads", 0u);
    if (j.contains("accum") && !j["accum"].is_null()) {
        try {
            c.accum = accum::accumulator_from_json(j["accum"]);
        } catch (const std::exception& e) {
            throw ValidationError(std::string("config.accum: ") + e.what());
        }
    }
    if (j.contains("score") && !j["score"].is_null()) {
        try {
            c.score = scores::score_config_from_json(j["score"]);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(std::string("config.") + e.what());
        }
    }

    if (c.replicates < 1) throw ValidationError("config.replicates: must be at least 1");
    if (c.alpha_grid.empty()) throw ValidationError("config.alpha_grid: must not be empty");
    for (std::size_t i = 0; i < c.alpha_grid.size(); ++i)
        if (!(c.alpha_grid[i] > 0.0 && c.alpha_grid[i] < 1.0))
            throw ValidationError("config.alpha_grid[" + std::to_string(i) + "]: outside (0,1)");
    if (c.tree_case < 1 || c.tree_case > 3) throw ValidationError("config.case: must be 1, 2 or 3");
    if (!(c.pi1 >= 0.0 && c.pi1 <= 1.0)) throw ValidationError("config.pi1: outside [0,1]");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ValidationError("config.delta: outside (0,1)");
    if (c.angles < 1) throw ValidationError("config.angles: must be positive");
    for (std::size_t i = 0; i < c.methods.size(); ++i)
        if (!known_method(c.methods[i]))
            throw ValidationError("config.methods[" + std::to_string(i) + "]: unknown method '" +
                                  c.methods[i] + "'");
    return c;
}

json to_json(const ExperimentConfig& c) {
    json accum;
    accum::to_json(accum, c.accum);
    return {{"scenario", to_string(c.scenario)}, {"case", c.tree_case},
            {"alpha_grid", c.alpha_grid},        {"replicates", c.replicates},
            {"rho", c.rho},                      {"seed", c.seed},
            {"methods", c.methods},              {"mu", c.mu},
            {"n", c.n},                          {"pi1", c.pi1},
            {"accum", accum},                    {"score", scores::to_json(c.score)},
            {"delta", c.delta},                  {"angles", c.angles},
            {"threads", c.threads}};
}

IdSet rejection_at(const engine::HistoryLog& history, std::size_t n, double alpha) {
    std::size_t stop = history.size() - 1;
    std::size_t size = n;
    for (std::size_t k = 0; k < history.size(); ++k) {
        const auto& e = history[k];
        size -= e.removed.size();
        if (size == 0 || (e.fdp_hat <= alpha && e.in_constraint)) {
            stop = k;
            break;
        }
    }
    std::vector<char> alive(n, 1);
    for (std::size_t k = 1; k <= stop; ++k)
        for (Id v : history[k].removed) alive[v] = 0;
    IdSet out;
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) out.push_back(static_cast<Id>(i));
    return out;
}

std::vector<FdpPower> run_method(const std::string& method, const ExperimentConfig& cfg,
                                 const Layout& layout, const Dataset& data) {
    std::vector<FdpPower> out;
    out.reserve(cfg.alpha_grid.size());
    if (method.rfind("star_", 0) == 0) {
        const double amin = *std::min_element(cfg.alpha_grid.begin(), cfg.alpha_grid.end());
        engine::Session s(data, cfg.accum, layout.constraint, amin, cfg.seed);
        auto rule = star_rule(method, cfg);
        engine::run_auto(s, *rule);
        const auto history = s.history();
        for (double a : cfg.alpha_grid) out.push_back(fdp_power(rejection_at(history, data.n, a), layout.is_null));
        return out;
    }
    if (method == "fixed_order") {
        std::vector<double> ordered(layout.fixed_order.size());
        for (std::size_t k = 0; k < ordered.size(); ++k) ordered[k] = data.p[layout.fixed_order[k]];
        for (double a : cfg.alpha_grid) {
            const std::size_t k = fixed_order_accumulation(ordered, cfg.accum, a);
            IdSet r(layout.fixed_order.begin(), layout.fixed_order.begin() + static_cast<std::ptrdiff_t>(k));
            std::sort(r.begin(), r.end());
            out.push_back(fdp_power(r, layout.is_null));
        }
        return out;
    }
    for (double a : cfg.alpha_grid) {
        const IdSet r = method == "bh" ? bh(data.p, a) : storey_bh(data.p, a);
        out.push_back(fdp_power(r, layout.is_null));
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const Layout layout = make_layout(cfg);
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);
    const std::size_t nm = cfg.methods.size();
    // results[r][m][a]
    std::vector<std::vector<std::vector<FdpPower>>> results(reps);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (std::size_t r = next++; r < reps; r = next++) {
            try {
                Rng rng(replicate_seed(cfg.seed, r));
                Dataset data;
                std::vector<double> z;
                draw_pvalues(layout, cfg.rho, rng, data, z);
                results[r].resize(nm);
                for (std::size_t m = 0; m < nm; ++m) results[r][m] = run_method(cfg.methods[m], cfg, layout, data);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = reps;
            }
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, reps));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentResult res;
    res.config = cfg;
    const double rd = static_cast<double>(reps);
    for (std::size_t m = 0; m < nm; ++m) {
        for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
            double sf = 0, sf2 = 0, sp = 0, sp2 = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                const FdpPower& v = results[r][m][a];
                sf += v.fdp;
                sf2 += v.fdp * v.fdp;
                sp += v.power;
                sp2 += v.power * v.power;
            }
            auto se = [&](double s, double s2) {
                if (reps < 2) return 0.0;
                const double var = std::max(0.0, (s2 - s * s / rd) / (rd - 1.0));
                return std::sqrt(var / rd);
            };
            MethodSummary row;
            row.method = cfg.methods[m];
            row.alpha = cfg.alpha_grid[a];
            row.fdr = sf / rd;
            row.fdr_se = se(sf, sf2);
            row.power = sp / rd;
            row.power_se = se(sp, sp2);
            row.mean_rejections = 0.0;
            for (std::size_t r = 0; r < reps; ++r)
                row.mean_rejections += static_cast<double>(results[r][m][a].rejections);
            row.mean_rejections /= rd;
            row.replicates = cfg.replicates;
            res.rows.push_back(row);
        }
    }
    return res;
}

const MethodSummary& ExperimentResult::at(const std::string& method, double alpha) const {
    for (const auto& r : rows)
        if (r.method == method && std::abs(r.alpha - alpha) < 1e-12) return r;
    throw std::out_of_range("no result for " + method + " at alpha " + std::to_string(alpha));
}

void write_results_csv(std::ostream& out, const ExperimentResult& r) {
    out << "# seed: " << r.config.seed << "\n";
    out << "scenario,case,rho,method,alpha,fdr,fdr_se,power,power_se,mean_rejections,replicates\n";
    out.precision(10);
    for (const auto& row : r.rows) {
        out << to_string(r.config.scenario) << ',' << r.config.tree_case << ',' << r.config.rho << ','
            << row.method << ',' << row.alpha << ',' << row.fdr << ',' << row.fdr_se << ','
            << row.power << ',' << row.power_se << ',' << row.mean_rejections << ','
            << row.replicates << '\n';
    }
}

}  // namespace star::evalab

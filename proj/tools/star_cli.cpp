// star: batch runs, simulations, wavelet denoising, figure tables and the
// HTTP oracle service.

#include <bit>
#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "star/evalab.hpp"
#include "star/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using star::engine::ValidationError;

namespace {

constexpr int kExitValidation = 2;

// Inline JSON text or a path to a JSON file.
json json_arg(const std::string& text, const std::string& what) {
    const auto b = text.find_first_not_of(" \t\n");
    try {
        if (b != std::string::npos && (text[b] == '{' || text[b] == '[')) return json::parse(text);
        std::ifstream in(text);
        if (!in) throw ValidationError(what + ": cannot open '" + text + "'");
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + ": malformed JSON: " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError(dir.string() + ": cannot create directory");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(path.string() + ": cannot write");
    return out;
}

struct RunArgs {
    std::string data, structure, constraint = "none", accum, score, out;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    double delta = star::constraints::kDefaultDelta;
    int angles = star::constraints::kDefaultAngles;
};

int cmd_run(const RunArgs& a) {
    using namespace star;
    const engine::Dataset data = service::read_dataset_csv(fs::path(a.data));
    std::optional<service::StructureRows> structure;
    if (!a.structure.empty()) structure = service::read_structure_csv(fs::path(a.structure));
    const json cj = service::constraint_json(a.constraint, structure, data.n, a.delta, a.angles);
    const json accum = a.accum.empty() ? json{{"kind", "seqstep"}, {"pstar", 0.5}} : json_arg(a.accum, "--accum");
    const json score = a.score.empty() ? json{{"kind", "canonical"}} : json_arg(a.score, "--score");
    service::CreateRequest req = service::decode_create(service::encode_create(data, accum, cj, a.alpha, a.seed, score));
    engine::Session s(std::move(req.data), std::move(req.accum), std::move(req.constraint), req.alpha, req.seed,
                      req.disclose_on_halt);
    auto rule = scores::make_rule(req.score);
    const auto t0 = std::chrono::steady_clock::now();
    engine::run_auto(s, *rule);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out(a.out);
    ensure_dir(out);
    const IdSet& rej = s.rejection();
    std::vector<char> in_r(s.n(), 0);
    for (Id v : rej) in_r[v] = 1;
    {
        auto f = open_out(out / "rejections.csv");
        f << "# seed: " << a.seed << "\nid,p,rejected\n";
        f.precision(17);
        for (std::size_t i = 0; i < s.n(); ++i) f << i << ',' << s.data().p[i] << ',' << int(in_r[i]) << '\n';
    }
    json trace = json::array(), members = json::array();
    const auto hist = s.history();
    for (std::size_t k = 0; k < hist.size(); ++k) {
        trace.push_back(hist[k].fdp_hat);
        members.push_back(hist[k].in_constraint);
    }
    const json report = {{"v", engine::kSchemaVersion},
                         {"seed", a.seed},
                         {"alpha", a.alpha},
                         {"rule", rule->name()},
                         {"tau", s.step()},
                         {"rejections", rej.size()},
                         {"fdp_hat", s.fdp_hat()},
                         {"fdp_hat_trace", trace},
                         {"in_constraint_trace", members},
                         {"wall_time_s", wall}};
    open_out(out / "report.json") << report.dump(2) << '\n';
    std::cout << "# seed: " << a.seed << "\nrejected " << rej.size() << " of " << s.n() << " at step " << s.step()
              << "\n";
    return 0;
}

int cmd_simulate(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
                 std::optional<int> replicates, unsigned threads) {
    auto cfg = star::evalab::experiment_config_from_json(json_arg(config, "--config"));
    if (seed) cfg.seed = *seed;
    if (replicates) {
        if (*replicates < 1) throw ValidationError("--replicates: must be at least 1");
        cfg.replicates = *replicates;
    }
    if (threads) cfg.threads = threads;
    const auto res = star::evalab::run_experiment(cfg);
    if (out.empty() || out == "-") {
        star::evalab::write_results_csv(std::cout, res);
    } else {
        auto f = open_out(out);
        star::evalab::write_results_csv(f, res);
    }
    return 0;
}

struct DenoiseArgs {
    std::string image, out;
    std::size_t size = 128;
    double snr = 0.5;
    std::uint64_t seed = 1;
    double alpha_star = 0.2;
    double alpha_bh = 0.05;
    std::string sided = "two";
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_denoise(const DenoiseArgs& a) {
    using namespace star::evalab;
    Image original;
    if (a.image.empty()) {
        original = synthetic_image(a.size);
    } else {
        try {
            original = read_pgm(a.image);
        } catch (const std::runtime_error& e) {
            throw ValidationError(e.what());
        }
    }
    if (original.rows != original.cols || !std::has_single_bit(original.rows))
        throw ValidationError("image must be square with a power-of-two side");
    Rng rng(a.seed);
    const Image noisy = add_noise(original, a.snr, rng);
    const DenoiseReport rep = denoise(original, noisy, a.alpha_star, a.alpha_bh, a.sided == "two");
    const fs::path out(a.out);
    ensure_dir(out);
    const std::string header = "seed: " + std::to_string(a.seed);
    write_pgm((out / "original.pgm").string(), original, header);
    write_pgm((out / "noisy.pgm").string(), noisy, header);
    json methods = json::array();
    for (const auto& m : rep.methods) {
        write_pgm((out / (m.name + ".pgm")).string(), m.recon, header);
        methods.push_back({{"method", m.name},
                           {"snr_db", finite_or_null(m.snr)},
                           {"cr", finite_or_null(m.cr)},
                           {"selected", m.selected}});
    }
    const json metrics = {{"v", 1},
                          {"seed", a.seed},
                          {"size", original.rows},
                          {"target_snr_db", a.snr},
                          {"input_snr_db", rep.input_snr},
                          {"sigma_hat", rep.sigma_hat},
                          {"sided", a.sided},
                          {"alpha_star", a.alpha_star},
                          {"alpha_bh", a.alpha_bh},
                          {"roundtrip_error", rep.roundtrip_error},
                          {"methods", methods}};
    open_out(out / "metrics.json") << metrics.dump(2) << '\n';
    std::cout << "# seed: " << a.seed << "\n" << metrics.dump(2) << "\n";
    return 0;
}

star::service::Service* g_service = nullptr;

int cmd_serve(const std::string& host, int port, const std::string& static_dir, const std::string& snapshots) {
    star::service::StoreOptions opts;
    if (!snapshots.empty()) opts.snapshot_dir = snapshots;
    star::service::Service svc(opts);
    const std::size_t restored = svc.store().load_snapshots();
    std::optional<fs::path> stat;
    if (!static_dir.empty()) {
        if (!fs::is_directory(static_dir)) throw ValidationError("--static: not a directory");
        stat = static_dir;
    }
    g_service = &svc;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    const bool ok = svc.serve(host, port, stat, [&](int bound) {
        std::cout << "# seed: none\nlistening on http://" << host << ':' << bound << " (" << restored
                  << " sessions restored)" << std::endl;
    });
    g_service = nullptr;
    if (!ok) {
        std::cerr << "error: cannot listen on " << host << ':' << port << "\n";
        return 1;
    }
    return 0;
}

std::string figure_of(const std::string& scenario) {
    if (scenario.rfind("convex_", 0) == 0) return "convex_regions";
    if (scenario.rfind("tree_", 0) == 0) return "tree_layouts";
    if (scenario.rfind("dag_", 0) == 0) return "dag_layouts";
    return scenario;
}

int cmd_figures(const std::vector<std::string>& inputs, const std::string& out) {
    std::ostringstream body;
    std::string seeds;
    body.precision(10);
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw ValidationError(path + ": cannot open");
        std::string line;
        std::vector<std::string> header;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (line.rfind("# seed:", 0) == 0) {
                seeds += (seeds.empty() ? "" : ",") + line.substr(7 + (line.size() > 7 && line[7] == ' '));
                continue;
            }
            if (line[0] == '#') continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
            if (header.empty()) {
                header = f;
                continue;
            }
            if (f.size() != header.size())
                throw ValidationError(path + ": line " + std::to_string(lineno) + ": wrong field count");
            std::map<std::string, std::string> row;
            for (std::size_t k = 0; k < f.size(); ++k) row[header[k]] = f[k];
            for (const char* key : {"scenario", "case", "rho", "method", "alpha", "fdr", "fdr_se", "power", "power_se"})
                if (!row.count(key)) throw ValidationError(path + ": missing column " + key);
            std::string panel = row["scenario"];
            if (row["scenario"].rfind("tree_", 0) == 0) panel += "_case" + row["case"];
            if (std::stod(row["rho"]) != 0.0) panel += "_rho" + row["rho"];
            for (const char* metric : {"fdr", "power"})
                body << figure_of(row["scenario"]) << ',' << panel << ',' << row["method"] << ',' << row["alpha"] << ','
                     << metric << ',' << row[metric] << ',' << row[std::string(metric) + "_se"] << '\n';
        }
    }
    auto write = [&](std::ostream& o) {
        o << "# seed: " << (seeds.empty() ? "unknown" : seeds) << "\n";
        o << "figure,panel,method,alpha,metric,value,se\n" << body.str();
    };
    if (out.empty() || out == "-") {
        write(std::cout);
    } else {
        auto f = open_out(out);
        write(f);
    }
    return 0;
}

int cmd_generate(const std::string& config, const std::string& out, std::uint64_t seed) {
    using namespace star;
    const auto cfg = evalab::experiment_config_from_json(json_arg(config, "--config"));
    const auto inst = evalab::gen_dataset(cfg, seed);
    const fs::path dir(out);
    ensure_dir(dir);
    {
        auto f = open_out(dir / "data.csv");
        f << "# seed: " << seed << "\n";
        service::write_dataset_csv(f, inst.layout.data);
    }
    const auto kind = inst.layout.constraint.kind();
    if (kind == constraints::Kind::Tree || kind == constraints::Kind::DagStrong || kind == constraints::Kind::DagWeak) {
        auto f = open_out(dir / "structure.csv");
        f << "# seed: " << seed << "\n";
        service::write_structure_csv(f, inst.layout.constraint);
    }
    {
        auto f = open_out(dir / "truth.csv");
        f << "# seed: " << seed << "\nid,null,mu\n";
        for (std::size_t i = 0; i < inst.layout.is_null.size(); ++i)
            f << i << ',' << int(inst.layout.is_null[i]) << ',' << inst.layout.mu[i] << '\n';
    }
    std::cout << "# seed: " << seed << "\nconstraint: " << constraints::to_string(kind) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Selectively traversed accumulation rules: interactive FDR control"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run an automated update rule on a dataset");
    run_cmd->add_option("--data", run.data, "CSV with header id,x1..xd,p")->required();
    run_cmd->add_option("--structure", run.structure, "CSV with header child,parent");
    run_cmd->add_option("--constraint", run.constraint, "none|convex2d|axisbox|tree|dag_strong|dag_weak");
    run_cmd->add_option("--accum", run.accum, "accumulator JSON (inline or file)");
    run_cmd->add_option("--score", run.score, "score rule JSON (inline or file)");
    run_cmd->add_option("--alpha", run.alpha, "target FDR level")->required();
    run_cmd->add_option("--seed", run.seed, "seed recorded with the session");
    run_cmd->add_option("--delta", run.delta, "peel fraction for convex2d/axisbox");
    run_cmd->add_option("--angles", run.angles, "directional probes for convex2d");
    run_cmd->add_option("--out", run.out, "output directory")->required();

    std::string sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    std::optional<int> sim_reps;
    unsigned sim_threads = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo FDR/power experiment");
    sim_cmd->add_option("--config", sim_config, "ExperimentConfig JSON (inline or file)")->required();
    sim_cmd->add_option("--out", sim_out, "results CSV (default stdout)");
    sim_cmd->add_option("--seed", sim_seed, "override the config seed");
    sim_cmd->add_option("--replicates", sim_reps, "override the replicate count");
    sim_cmd->add_option("--threads", sim_threads, "worker threads (0 = all cores)");

    DenoiseArgs den;
    auto* den_cmd = app.add_subcommand("denoise", "Wavelet quadtree denoising");
    den_cmd->add_option("--image", den.image, "clean PGM image (default: synthetic)");
    den_cmd->add_option("--size", den.size, "side of the synthetic image");
    den_cmd->add_option("--snr", den.snr, "input SNR in dB");
    den_cmd->add_option("--seed", den.seed, "noise seed");
    den_cmd->add_option("--alpha-star", den.alpha_star, "STAR level");
    den_cmd->add_option("--alpha-bh", den.alpha_bh, "BH level");
    den_cmd->add_option("--sided", den.sided, "one|two")->check(CLI::IsMember({"one", "two"}));
    den_cmd->add_option("--out", den.out, "output directory")->required();

    std::string host = "127.0.0.1", static_dir, snapshots;
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP oracle service");
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "port (0 picks a free one)");
    serve_cmd->add_option("--static", static_dir, "directory served at /");
    serve_cmd->add_option("--snapshots", snapshots, "snapshot directory");

    std::vector<std::string> fig_in;
    std::string fig_out;
    auto* fig_cmd = app.add_subcommand("figures", "Tidy per-figure CSV from results CSVs");
    fig_cmd->add_option("--results", fig_in, "results CSV files")->required();
    fig_cmd->add_option("--out", fig_out, "output CSV (default stdout)");

    std::string gen_config, gen_out;
    std::uint64_t gen_seed = 1;
    auto* gen_cmd = app.add_subcommand("generate", "Write one simulated dataset as CSV files");
    gen_cmd->add_option("--config", gen_config, "ExperimentConfig JSON (inline or file)")->required();
    gen_cmd->add_option("--seed", gen_seed, "draw seed");
    gen_cmd->add_option("--out", gen_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*sim_cmd) return cmd_simulate(sim_config, sim_out, sim_seed, sim_reps, sim_threads);
        if (*den_cmd) return cmd_denoise(den);
        if (*serve_cmd) return cmd_serve(host, port, static_dir, snapshots);
        if (*fig_cmd) return cmd_figures(fig_in, fig_out);
        if (*gen_cmd) return cmd_generate(gen_config, gen_out, gen_seed);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

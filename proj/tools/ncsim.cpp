// ncsim: single runs, sweeps and the analytical solver from the command line.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ncsim/experiment.hpp"
#include "ncsim/numopt.hpp"
#include "ncsim/scenario_io.hpp"

using namespace ncsim;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string out_dir;
    std::string format = "json";
};

Scenario load(const std::string& name, const std::vector<double>& caps)
{
    if (name.ends_with(".json"))
        return load_scenario(name);
    return make_topology(name, caps);
}

void write_out(const Globals& g, const std::string& file, const std::string& text)
{
    if (g.out_dir.empty()) {
        std::cout << text;
        return;
    }
    fs::create_directories(g.out_dir);
    write_file(fs::path(g.out_dir) / file, text);
    std::cerr << "wrote " << (fs::path(g.out_dir) / file).string() << '\n';
}

double parse_recode(const std::string& s)
{
    if (s == "on-enqueue")
        return 0.0;
    if (s.rfind("every-ms:", 0) == 0) {
        const double ms = std::stod(s.substr(9));
        if (!(ms > 0.0))
            throw CLI::ValidationError("--recode", "interval must be positive");
        return ms / 1000.0;
    }
    throw CLI::ValidationError("--recode", "expected on-enqueue or every-ms:T");
}

nlohmann::ordered_json solve_json(const Network& net, const SolveResult& r)
{
    nlohmann::ordered_json j;
    j["converged"] = r.trace.converged;
    j["iterations"] = r.trace.iterations;
    j["x"] = r.state.x;
    j["sum_x"] = r.sum_x();
    j["utility"] = log_utility(r.state.x);
    nlohmann::ordered_json q;
    for (std::size_t h = 0; h < net.graph.hyperarcs().size(); ++h)
        q.push_back(r.state.q[h]);
    j["q"] = q;
    return j;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Network-coding-aware queue management simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "RNG seed (first seed for sweeps)");
    app.add_option("--out-dir", g.out_dir, "Write outputs here instead of stdout");
    app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    // sim
    auto* sim = app.add_subcommand("sim", "Run one simulation and print its metrics");
    std::string sim_scenario = "x";
    std::string qm = "ncaqm", transport = "tcp", recode = "on-enqueue", fallback = "tail",
                knowledge = "oracle";
    SimConfig cfg;
    double capacity = 1.0;
    sim->add_option("--scenario,--topology", sim_scenario, "Built-in topology name or scenario JSON");
    sim->add_option("--qm", qm, "nonc, cope, bfly or ncaqm")
        ->check(CLI::IsMember({"nonc", "cope", "bfly", "ncaqm"}));
    sim->add_option("--transport", transport, "tcp or optimal")->check(CLI::IsMember({"tcp", "optimal"}));
    sim->add_option("--buffer", cfg.qm.buffer, "Relay buffer in packets");
    sim->add_option("--window", cfg.qm.window, "Transmissions per split estimate");
    sim->add_option("--recode", recode, "on-enqueue or every-ms:T");
    sim->add_option("--drop-fallback", fallback, "tail or incoming")
        ->check(CLI::IsMember({"tail", "incoming"}));
    sim->add_option("--knowledge", knowledge, "oracle or delayed")
        ->check(CLI::IsMember({"oracle", "delayed"}));
    sim->add_option("--capacity", capacity, "Link bitrate in Mbps");
    sim->add_option("--packet-size", cfg.tcp.mss, "Data packet bytes");
    sim->add_option("--duration", cfg.duration, "Simulated seconds")->check(CLI::PositiveNumber);
    sim->add_option("--loss", cfg.channel.loss, "Per-attempt loss probability")->check(CLI::Range(0.0, 1.0));
    sim->add_flag("--trace", cfg.trace, "Include the event trace");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a preset or an experiment spec file");
    std::string preset_name, spec_file;
    std::size_t nseeds = 0;
    double sweep_duration = 0.0;
    unsigned threads = 0;
    auto* preset_opt = sweep->add_option("--preset", preset_name, "Built-in preset")
                           ->check(CLI::IsMember(preset_names()));
    sweep->add_option("--spec", spec_file, "Experiment spec JSON")->excludes(preset_opt);
    sweep->add_option("--seeds", nseeds, "Number of seeds, starting at --seed");
    sweep->add_option("--duration", sweep_duration, "Override simulated seconds");
    sweep->add_option("--threads", threads, "Worker threads (0: all cores)");
    sweep->add_flag("--list", "List presets");

    // solve / oracle
    auto* solve_cmd = app.add_subcommand("solve", "Run the analytical rate solver");
    auto* oracle_cmd = app.add_subcommand("oracle", "Grid-search the optimum (up to 3 flows)");
    std::string topo = "alice-bob", trace_file;
    std::vector<double> caps;
    int coding = 1;
    SolverConfig scfg;
    double grid_step = 1e-3;
    for (auto* c : {solve_cmd, oracle_cmd}) {
        c->add_option("--scenario,--topology", topo, "Built-in topology name or scenario JSON");
        c->add_option("--caps", caps, "Link capacities in topology order")->delimiter(',');
        c->add_option("--coding", coding, "Coding depth in hops")->check(CLI::IsMember({0, 1, 2}));
    }
    solve_cmd->add_option("--max-iters", scfg.max_iters, "Iteration cap");
    solve_cmd->add_option("--tol", scfg.tol, "Convergence tolerance")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--step", scfg.step_size, "Initial step size")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--trace", trace_file, "Write the iteration trace as CSV");
    oracle_cmd->add_option("--grid-step", grid_step, "Grid resolution")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            cfg.seed = g.seed;
            cfg.qm.discipline = parse_discipline(qm);
            cfg.transport = parse_transport(transport);
            cfg.qm.recode_interval = parse_recode(recode);
            cfg.qm.fallback = fallback == "incoming" ? DropFallback::incoming : DropFallback::tail;
            cfg.knowledge = knowledge == "delayed" ? KnowledgeMode::delayed : KnowledgeMode::oracle;
            cfg.channel.bitrate_bps = capacity * 1e6;
            const Metrics m = simulate(load(sim_scenario, {}), cfg);
            write_out(g, "sim.json", to_json(m).dump(2) + "\n");
            return 0;
        }
        if (sweep->parsed()) {
            if (sweep->count("--list")) {
                for (const auto& n : preset_names())
                    std::cout << n << '\n';
                return 0;
            }
            ExperimentSpec spec;
            if (!spec_file.empty()) {
                std::ifstream f(spec_file);
                if (!f)
                    throw ExperimentError("cannot read " + spec_file);
                spec = spec_from_json(nlohmann::json::parse(f));
            } else if (!preset_name.empty()) {
                spec = preset(preset_name);
            } else {
                throw ExperimentError("sweep needs --preset or --spec");
            }
            if (nseeds > 0 || app.count("--seed"))
                spec.seeds = seed_range(g.seed, nseeds > 0 ? nseeds : spec.seeds.size());
            if (sweep_duration > 0.0)
                spec.duration = sweep_duration;
            if (threads > 0)
                spec.threads = threads;
            const ResultTable t = run_experiment(spec);
            const fs::path dir = g.out_dir.empty() ? fs::path("results") : fs::path(g.out_dir);
            for (const auto& p : emit(t, dir, parse_format(g.format), spec.cdf))
                std::cerr << "wrote " << p.string() << '\n';
            std::cout << summary_csv(t);
            for (const auto& r : t.rows)
                if (!r.ok())
                    std::cerr << "cell failed: " << r.scenario << ' ' << r.arm << " seed " << r.seed << ": "
                              << r.error << '\n';
            return static_cast<int>(std::min<std::size_t>(t.failures(), 255));
        }
        const Network net = build_network(load(topo, caps), static_cast<CodingDepth>(coding));
        if (solve_cmd->parsed()) {
            const SolveResult r = solve(net, scfg);
            if (!trace_file.empty()) {
                std::ofstream f(trace_file);
                if (!f)
                    throw std::runtime_error("cannot write " + trace_file);
                r.trace.write_csv(f, net);
            }
            write_out(g, "solve.json", solve_json(net, r).dump(2) + "\n");
            return r.trace.converged ? 0 : 1;
        }
        if (oracle_cmd->parsed()) {
            const BruteForceResult r = brute_force_optimum(net, grid_step);
            nlohmann::ordered_json j;
            j["x"] = r.x;
            j["sum_x"] = r.sum_x();
            j["utility"] = r.objective;
            write_out(g, "oracle.json", j.dump(2) + "\n");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

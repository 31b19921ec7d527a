// xpoint: command-line driver for the crosspoint eigenvector circuit simulator.
//
//   xpoint simulate <matrix.csv> [options]
//   xpoint sweep --mode delta|size|variation [options]
//   xpoint pagerank <edges.txt> [options]
//   xpoint rerun <manifest.json>
//
// Exit codes: 0 converged, 1 usage / input error, 2 no convergence,
// 3 numerical instability.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xpoint/xpoint.hpp"

namespace fs = std::filesystem;
using namespace xpoint;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kNoConvergence = 2, kInstability = 3 };

struct CircuitFlags {
    double alpha = 0.05;
    double l0 = 1e5;
    double gbw_hz = 16e6;
    double vsupp = 1.0;
    double x0 = 1e-3;
    double tmax = 1e-3;

    void attach(CLI::App& app)
    {
        app.add_option("--alpha", alpha, "FD step alpha = L0*omega0*dt")->capture_default_str();
        app.add_option("--l0", l0, "op-amp DC open-loop gain")->capture_default_str();
        app.add_option("--gbw-hz", gbw_hz, "op-amp gain-bandwidth product in Hz")->capture_default_str();
        app.add_option("--vsupp", vsupp, "supply rail in V (symmetric)")->capture_default_str();
        app.add_option("--x0", x0, "initial output voltage in V")->capture_default_str();
        app.add_option("--tmax", tmax, "simulated horizon in s")->capture_default_str();
    }

    OpAmpParams params() const { return OpAmpParams::from_gbw_hz(l0, gbw_hz, vsupp); }

    SimConfig config() const
    {
        SimConfig c;
        c.alpha = alpha;
        c.x0 = x0;
        c.t_max = tmax;
        c.validate();
        return c;
    }

    json to_json() const
    {
        return {{"alpha", alpha}, {"l0", l0}, {"gbw_hz", gbw_hz}, {"vsupp", vsupp}, {"x0", x0}, {"tmax", tmax}};
    }
};

std::string default_out_dir()
{
    if (const char* env = std::getenv("XPOINT_OUT_DIR"); env && *env) {
        return env;
    }
    return ".";
}

std::string fnv1a64_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void ensure_parent(const std::string& path)
{
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
}

std::ofstream open_out(const std::string& path)
{
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    return out;
}

void write_json(const std::string& path, const json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

/// Written next to every output; `xpoint rerun` replays it.
json manifest(const std::string& command, const std::vector<std::string>& argv, json params,
              const std::vector<std::string>& inputs, const std::vector<std::string>& outputs, std::uint64_t seed)
{
    json in = json::array();
    for (const auto& p : inputs) {
        in.push_back({{"path", p}, {"fnv1a64", fnv1a64_file(p)}});
    }
    return {{"command", command},
            {"argv", argv},
            {"params", std::move(params)},
            {"inputs", in},
            {"outputs", outputs},
            {"seed", seed}};
}

std::vector<std::size_t> parse_sizes(const std::string& spec)
{
    // "3..30" (step 3 when the start is 3 and a step is not given), "3..30:3", or "3,6,9"
    std::vector<std::size_t> out;
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
        const std::size_t lo = std::stoul(spec.substr(0, dots));
        std::string rest = spec.substr(dots + 2);
        std::size_t step = lo;
        if (const auto colon = rest.find(':'); colon != std::string::npos) {
            step = std::stoul(rest.substr(colon + 1));
            rest = rest.substr(0, colon);
        }
        const std::size_t hi = std::stoul(rest);
        if (lo == 0 || step == 0 || hi < lo) {
            throw CLI::ValidationError("--sizes", "bad range " + spec);
        }
        for (std::size_t n = lo; n <= hi; n += step) {
            out.push_back(n);
        }
        return out;
    }
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stoul(item));
    }
    return out;
}

int exit_for(const Trace& tr) { return tr.computing_time ? kOk : kNoConvergence; }

// ---------------------------------------------------------------------------

struct SimulateCmd {
    std::string matrix;
    double delta = 0.01;
    std::string out;
    bool print_json = false;
    CircuitFlags flags;

    int run(const std::vector<std::string>& argv) const
    {
        const Matrix a = load_matrix_csv(matrix);
        if (!a.square() || !(a.min_entry() > 0.0)) {
            throw std::invalid_argument(matrix + ": expected a square matrix with positive entries");
        }
        const OpAmpParams params = flags.params();
        const SimConfig cfg = flags.config();
        const EigPair oracle = power_iteration(a);
        const auto sys = EigenSystem<Matrix>::uniform(a, oracle.value, delta, params);
        const Trace tr = simulate(sys, cfg);
        const double eps = solution_error(tr.steady_state.span(), oracle.vector.span());
        const double lh = spectral_abscissa(sys);

        const std::string prefix = out.empty() ? (fs::path(default_out_dir()) / "simulate").string() : out;
        const std::string trace_path = prefix + ".trace.csv";
        const std::string summary_path = prefix + ".summary.json";
        {
            auto f = open_out(trace_path);
            write_trace_csv(f, tr);
        }
        const json summary = trace_summary(tr, eps, lh);
        write_json(summary_path, summary);
        json p = flags.to_json();
        p["delta"] = delta;
        write_json(prefix + ".manifest.json",
                   manifest("simulate", argv, p, {matrix}, {trace_path, summary_path}, 0));
        if (print_json) {
            std::cout << summary.dump() << '\n';
        }
        return exit_for(tr);
    }
};

struct PagerankCmd {
    std::string edges;
    std::size_t subset_n = 0;
    double delta = 0.01;
    double p = 0.85;
    std::size_t topk = 10;
    std::string out;
    bool print_json = false;
    CircuitFlags flags;

    int run(const std::vector<std::string>& argv) const
    {
        CitationMatrix c = load_edge_list(edges);
        if (subset_n != 0) {
            c = subset(c, subset_n);
        }
        const TransitionMatrix t = transition_matrix(c, p);
        const RankResult r = rank(t, delta, flags.config(), flags.params());

        const std::string prefix = out.empty() ? (fs::path(default_out_dir()) / "pagerank").string() : out;
        const std::string json_path = prefix + ".rank.json";
        const std::string csv_path = prefix + ".rank.csv";
        write_json(json_path, to_json(r));
        {
            auto f = open_out(csv_path);
            write_rank_csv(f, r, topk);
        }
        json params = flags.to_json();
        params["delta"] = delta;
        params["p"] = p;
        params["subset_n"] = subset_n;
        params["topk"] = topk;
        write_json(prefix + ".manifest.json", manifest("pagerank", argv, params, {edges}, {json_path, csv_path}, 0));

        if (print_json) {
            json s = {{"n", t.n()},
                      {"links", c.link_count()},
                      {"computing_time_s", r.computing_time ? json(*r.computing_time) : json(nullptr)},
                      {"epsilon", r.epsilon},
                      {"top", std::vector<std::size_t>(r.order.begin(),
                                                       r.order.begin() + static_cast<std::ptrdiff_t>(
                                                                             std::min(topk, r.order.size())))}};
            std::cout << s.dump() << '\n';
        } else {
            std::cout << "pages " << t.n() << ", links " << c.link_count() << '\n';
            for (std::size_t i = 0; i < std::min(topk, r.order.size()); ++i) {
                std::cout << i + 1 << ". page " << r.order[i] << "  " << r.scores[r.order[i] - 1] << '\n';
            }
        }
        return r.computing_time ? kOk : kNoConvergence;
    }
};

struct SweepCmd {
    std::string mode;
    std::string matrix;
    std::string edges;
    std::string sizes = "3..30";
    std::size_t trials = 100;
    std::vector<double> deltas;
    double delta_max = 0.02;
    double p = 0.85;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out_dir;
    bool print_json = false;
    CircuitFlags flags;

    json params_json() const
    {
        json j = flags.to_json();
        j["mode"] = mode;
        j["matrix"] = matrix;
        j["edges"] = edges;
        j["sizes"] = sizes;
        j["trials"] = trials;
        j["deltas"] = deltas;
        j["delta_max"] = delta_max;
        j["p"] = p;
        j["seed"] = seed;
        return j;
    }

    int run(const std::vector<std::string>& argv) const
    {
        const std::string dir = out_dir.empty() ? (fs::path(default_out_dir()) / ("sweep-" + mode)).string() : out_dir;
        fs::create_directories(dir);
        const std::string rows_path = (fs::path(dir) / "rows.csv").string();
        const std::string summary_path = (fs::path(dir) / "summary.json").string();
        const std::string manifest_path = (fs::path(dir) / "manifest.json").string();

        std::vector<std::string> inputs;
        if (!matrix.empty()) {
            inputs.push_back(matrix);
        }
        if (!edges.empty()) {
            inputs.push_back(edges);
        }
        const json m = manifest("sweep", argv, params_json(), inputs, {rows_path, summary_path}, seed);

        // resume only when the previous run used the same parameters and inputs
        std::vector<SweepRow> completed;
        if (fs::exists(manifest_path) && fs::exists(rows_path)) {
            std::ifstream prev(manifest_path);
            const json old = json::parse(prev, nullptr, false);
            if (!old.is_discarded() && old.value("params", json()) == m["params"] &&
                old.value("inputs", json()) == m["inputs"]) {
                std::ifstream rows_in(rows_path);
                completed = read_sweep_csv(rows_in);
                std::cerr << "resuming: " << completed.size() << " completed rows\n";
            }
        }
        write_json(manifest_path, m);
        {
            auto f = open_out(rows_path);
            f << kSweepCsvHeader << '\n';
            for (const auto& r : completed) {
                write_sweep_row(f, r);
            }
        }
        std::ofstream append(rows_path, std::ios::app);
        std::size_t finished = 0;
        SweepOptions opt;
        opt.workers = workers;
        opt.completed = &completed;
        opt.on_row = [&](const SweepRow& r) {
            write_sweep_row(append, r);
            append.flush();
            ++finished;
            std::cerr << "[" << finished << "] n=" << r.n << " delta=" << r.delta << " trial=" << r.trial
                      << (r.ok() ? "" : " (" + r.error + ")") << '\n';
        };

        const SimConfig cfg = flags.config();
        const OpAmpParams params = flags.params();
        SweepReport rep;
        if (mode == "delta") {
            if (matrix.empty()) {
                throw CLI::ValidationError("--matrix", "required for --mode delta");
            }
            const auto grid = deltas.empty() ? std::vector<double>{0.003, 0.006, 0.012, 0.024, 0.048, 0.06} : deltas;
            rep = sweep_delta(load_matrix_csv(matrix), grid, cfg, params, opt);
        } else if (mode == "size") {
            const auto grid = deltas.empty() ? std::vector<double>{0.003, 0.01, 0.02, 0.04} : deltas;
            const auto ns = parse_sizes(sizes);
            rep = sweep_size(ns, trials, grid, seed, cfg, params, opt);
        } else if (mode == "variation") {
            if (!edges.empty()) {
                const TransitionMatrix t = transition_matrix(load_edge_list(edges), p);
                const EigPair oracle = power_iteration(t);
                rep = variation_trials(t, 1.0, oracle.vector.span(), delta_max, trials, seed, cfg, params, opt);
            } else if (!matrix.empty()) {
                rep = variation_trials(load_matrix_csv(matrix), delta_max, trials, seed, cfg, params, opt);
            } else {
                throw CLI::ValidationError("--matrix/--edges", "one is required for --mode variation");
            }
        } else {
            throw CLI::ValidationError("--mode", "must be delta, size or variation");
        }
        append.close();
        {
            auto f = open_out(rows_path);
            write_sweep_csv(f, rep);
        }
        const json summary = sweep_summary(rep);
        write_json(summary_path, summary);
        if (print_json) {
            std::cout << summary.dump() << '\n';
        }
        return kOk;
    }
};

int dispatch(const std::vector<std::string>& args);

int rerun(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open manifest " + path);
    }
    const json m = json::parse(in);
    for (const auto& input : m.at("inputs")) {
        const std::string p = input.at("path");
        if (fnv1a64_file(p) != input.at("fnv1a64").get<std::string>()) {
            std::cerr << "warning: input changed since the manifest was written: " << p << '\n';
        }
    }
    return dispatch(m.at("argv").get<std::vector<std::string>>());
}

int dispatch(const std::vector<std::string>& args)
{
    CLI::App app{"Crosspoint eigenvector circuit simulator"};
    app.require_subcommand(1);

    SimulateCmd sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "simulate one matrix and write trace + summary");
    simulate_cmd->add_option("matrix", sim.matrix, "CSV matrix file")->required()->check(CLI::ExistingFile);
    simulate_cmd->add_option("--delta", sim.delta, "eigenvalue mismatch")->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "output prefix");
    simulate_cmd->add_flag("--json", sim.print_json, "print the summary JSON on stdout");
    sim.flags.attach(*simulate_cmd);

    SweepCmd sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a delta, size or variation campaign");
    sweep_cmd->add_option("--mode", sweep.mode, "delta | size | variation")
        ->required()
        ->check(CLI::IsMember({"delta", "size", "variation"}));
    sweep_cmd->add_option("--matrix", sweep.matrix, "CSV matrix (delta, variation)")->check(CLI::ExistingFile);
    sweep_cmd->add_option("--edges", sweep.edges, "edge list (variation on a PageRank system)")
        ->check(CLI::ExistingFile);
    sweep_cmd->add_option("--sizes", sweep.sizes, "sizes: 3..30, 3..30:3 or 3,6,9")->capture_default_str();
    sweep_cmd->add_option("--trials", sweep.trials, "trials per cell")->capture_default_str();
    sweep_cmd->add_option("--deltas", sweep.deltas, "comma-separated deltas")->delimiter(',');
    sweep_cmd->add_option("--delta-max", sweep.delta_max, "variation: delta_i ~ U(0, delta_max)")
        ->capture_default_str();
    sweep_cmd->add_option("--p", sweep.p, "random-walk probability (variation with --edges)")->capture_default_str();
    sweep_cmd->add_option("--seed", sweep.seed, "base seed")->capture_default_str();
    sweep_cmd->add_option("--workers", sweep.workers, "worker threads")->capture_default_str();
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "output directory");
    sweep_cmd->add_flag("--json", sweep.print_json, "print the aggregate JSON on stdout");
    sweep.flags.attach(*sweep_cmd);

    PagerankCmd pr;
    auto* pagerank_cmd = app.add_subcommand("pagerank", "rank web pages with the circuit");
    pagerank_cmd->add_option("edges", pr.edges, "edge list: 'from to' per line")->required()->check(CLI::ExistingFile);
    pagerank_cmd->add_option("--subset-n", pr.subset_n, "use pages 1..N only");
    pagerank_cmd->add_option("--delta", pr.delta, "eigenvalue mismatch")->capture_default_str();
    pagerank_cmd->add_option("--p", pr.p, "random-walk probability")->capture_default_str();
    pagerank_cmd->add_option("--topk", pr.topk, "pages to list")->capture_default_str();
    pagerank_cmd->add_option("--out", pr.out, "output prefix");
    pagerank_cmd->add_flag("--json", pr.print_json, "print a JSON summary on stdout");
    pr.flags.attach(*pagerank_cmd);

    std::string manifest_path;
    auto* rerun_cmd = app.add_subcommand("rerun", "replay a run manifest");
    rerun_cmd->add_option("manifest", manifest_path, "manifest JSON")->required()->check(CLI::ExistingFile);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate_cmd) {
            return sim.run(args);
        }
        if (*sweep_cmd) {
            return sweep.run(args);
        }
        if (*pagerank_cmd) {
            return pr.run(args);
        }
        if (*rerun_cmd) {
            return rerun(manifest_path);
        }
    } catch (const InstabilityError& e) {
        std::cerr << "instability: " << e.what() << '\n';
        return kInstability;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return kNoConvergence;
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}

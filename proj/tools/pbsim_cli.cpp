// pbsim command line: simulate, equilibrium, metrics.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pbsim/config_io.hpp"
#include "pbsim/equilibrium.hpp"
#include "pbsim/fairness.hpp"
#include "pbsim/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pbsim;

namespace {

constexpr const char* kVersion = "pbsim 0.1.0";

enum Exit { ok = 0, config_error = 2, io_error = 3, no_convergence = 4 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw IoError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& digest, std::uint64_t seed,
                    const std::string& started, std::vector<std::string> outputs) {
    outputs.push_back("manifest.json");
    json m = {{"tool", kVersion},     {"command", command},   {"config_digest", digest},
              {"master_seed", seed},  {"started", started},   {"finished", timestamp()},
              {"outputs", outputs}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void print_violations(const ConfigError& e) {
    std::cerr << "configuration error\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v.field << ": " << v.message << "\n";
}

struct SimulateArgs {
    std::string config_path;
    std::string scenario = "baseline";
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> overrides;
    int builders = 10;
    long long trajectories = 10;
    unsigned workers = 0;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto started = timestamp();
    ScenarioConfig config;
    try {
        if (!a.config_path.empty()) {
            config = parse_config(read_file(a.config_path));
            for (const auto& o : a.overrides) config = apply_override(config, o);
        } else {
            ScenarioParams params;
            params.multi_builder_count = a.builders;
            config = build_scenario(parse_scenario_kind(a.scenario), a.overrides, params);
        }
        if (a.seed) config.seed = *a.seed;
        validate(config);
    } catch (const ConfigError& e) {
        print_violations(e);
        return config_error;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error\n  " << e.what() << "\n";
        return config_error;
    }

    const fs::path dir(a.out);
    ensure_dir(dir);
    EnsembleOptions opts;
    opts.workers = a.workers;
    opts.keep_trajectories = a.trajectories;
    const auto result = run_ensemble(config, opts);

    std::ostringstream csv;
    write_trajectories_csv(csv, result.trajectories, config.builders.size());
    write_file(dir / "trajectories.csv", csv.str());
    write_file(dir / "ensemble.json", ensemble_json(result));
    write_file(dir / "config.txt", serialize(config));
    write_manifest(dir, "simulate", result.config_digest, config.seed, started,
                   {"trajectories.csv", "ensemble.json", "config.txt"});

    const auto& f = result.fairness;
    std::cout << "scenario " << to_string(config.kind) << ", " << config.builders.size() << " builders, "
              << config.repetitions << " repetitions x " << config.rounds << " rounds, seed " << config.seed << "\n"
              << "builder 0 final mean lambda " << fixed(result.final_mean_lambda[0], 4) << "\n"
              << "fairness: Pr[lambda in [" << fixed(f.fair_low, 4) << ", " << fixed(f.fair_high, 4)
              << "]] = " << fixed(f.empirical_prob, 3) << " -> " << (f.satisfied ? "satisfied" : "not satisfied")
              << "\n"
              << "absorbed " << result.absorption.count << "/" << result.repetitions;
    if (result.absorption.median) std::cout << ", median round " << fixed(*result.absorption.median, 1);
    if (result.absorption.at_ceiling) std::cout << " (" << result.absorption.at_ceiling << " at a loyal-floor ceiling)";
    std::cout << "\nwrote " << dir.string() << "/{trajectories.csv, ensemble.json, config.txt, manifest.json}\n";
    return ok;
}

struct EquilibriumArgs {
    int m = 1;
    int n = 1;
    double reserve = 0.0;
    int grid = 2048;
    long long samples = 1000000;
    std::uint64_t seed = 42;
    std::string out = "out";
};

int cmd_equilibrium(const EquilibriumArgs& a) {
    const auto started = timestamp();
    if (a.m < 1 || a.n < 1 || a.grid < 512 || a.samples < 10000) {
        std::cerr << "configuration error\n  m and n must be positive, grid >= 512, samples >= 1e4\n";
        return config_error;
    }
    // the larger cartel is the strong side
    const int strong = std::max(a.m, a.n), weak = std::min(a.m, a.n);
    const auto H = ValueDistribution::power(1);
    const auto Fi = cartel(H, strong), Fj = cartel(H, weak);
    const std::string spec = "m=" + std::to_string(a.m) + "\nn=" + std::to_string(a.n) + "\nreserve=" +
                             format_double(a.reserve) + "\ngrid=" + std::to_string(a.grid) + "\nsamples=" +
                             std::to_string(a.samples) + "\nseed=" + std::to_string(a.seed) + "\n";
    const fs::path dir(a.out);

    BidEquilibrium eq;
    try {
        eq = solve_equilibrium(Fi, Fj, a.reserve, a.grid);
    } catch (const SolverDivergence& e) {
        std::cerr << "solver divergence: " << e.what() << "\n  bracketing history (last 5):\n";
        const auto& h = e.history();
        for (std::size_t k = h.size() > 5 ? h.size() - 5 : 0; k < h.size(); ++k)
            std::cerr << "    [" << format_double(h[k].first) << ", " << format_double(h[k].second) << "]\n";
        return no_convergence;
    } catch (const NonConvergence& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return no_convergence;
    } catch (const NoCompetitionError& e) {
        std::cerr << "configuration error\n  " << e.what() << "\n";
        return config_error;
    }

    Rng rng(stream_seed(a.seed, 0));
    const auto ver = verify_equilibrium(eq, Fi, Fj, a.samples, rng);
    RevenueEstimate rev;
    try {
        rev = expected_revenue(eq, strong, weak, H, a.samples, rng);
    } catch (const NumericalIntegrityError& e) {
        std::cerr << "numerical integrity: " << e.what() << "\n";
        return no_convergence;
    }

    ensure_dir(dir);
    std::ostringstream table;
    write_equilibrium(table, eq);
    write_file(dir / "equilibrium.txt", table.str());
    json report = {{"m", a.m},
                   {"n", a.n},
                   {"strong_exponent", strong},
                   {"weak_exponent", weak},
                   {"reserve", a.reserve},
                   {"grid", a.grid},
                   {"b_low", eq.b_low},
                   {"b_high", eq.b_high},
                   {"residual_max", eq.residual_max},
                   {"shooting_stages", eq.stages},
                   {"revenue", rev.revenue},
                   {"revenue_mc", rev.mc_revenue},
                   {"revenue_mc_se", rev.mc_se},
                   {"checks",
                    {{"residual_ok", ver.residual_ok},
                     {"best_response_ok", ver.best_response_ok},
                     {"best_response_worst_gain", ver.worst_gain},
                     {"dominance_ok", ver.dominance_ok},
                     {"ordering_ok", ver.ordering_ok},
                     {"strong_win_prob", ver.strong_win_prob},
                     {"strong_win_se", ver.strong_win_se},
                     {"failures", ver.failures}}}};
    write_file(dir / "equilibrium.json", report.dump(2) + "\n");
    write_manifest(dir, "equilibrium", sha256_hex(spec), a.seed, started, {"equilibrium.txt", "equilibrium.json"});

    std::cout << "equilibrium H^" << strong << " vs H^" << weak << ", reserve " << format_double(a.reserve) << "\n"
              << "b_high " << fixed(eq.b_high, 6) << ", residual_max " << eq.residual_max << "\n"
              << "revenue " << fixed(rev.revenue, 5) << " (Monte Carlo " << fixed(rev.mc_revenue, 5)
              << " +- " << fixed(rev.mc_se, 5) << ")\n"
              << "checks: " << (ver.passed() ? "all passed" : "FAILED") << "\n";
    for (const auto& f : ver.failures) std::cout << "  " << f << "\n";
    std::cout << "wrote " << dir.string() << "/{equilibrium.txt, equilibrium.json, manifest.json}\n";
    return ok;
}

struct MetricsArgs {
    std::string input;
    std::string method = "value_relative";
    std::string coverage = "auto";
    std::string out = "out";
};

int cmd_metrics(const MetricsArgs& a) {
    const auto started = timestamp();
    const std::string text = read_file(a.input);
    std::vector<BuilderStats> rows;
    try {
        rows = parse_builder_csv(text);
    } catch (const std::exception& e) {
        std::cerr << "malformed CSV: " << e.what() << "\n";
        return config_error;
    }
    std::vector<double> shares;
    double sum = 0.0;
    for (const auto& r : rows) {
        shares.push_back(r.market_share);
        sum += r.market_share;
    }
    ShareCoverage cov;
    if (a.coverage == "complete") {
        cov = ShareCoverage::complete;
    } else if (a.coverage == "partial") {
        cov = ShareCoverage::partial;
    } else if (a.coverage == "auto") {
        cov = std::abs(sum - 1.0) <= 1e-6 ? ShareCoverage::complete : ShareCoverage::partial;
    } else {
        std::cerr << "configuration error\n  --coverage must be auto, complete or partial\n";
        return config_error;
    }

    json out_rows = json::array();
    double index = 0.0;
    try {
        index = hhi(shares, cov);
        std::cout << "HHI " << fixed(index, 4) << " over " << rows.size() << " builders (shares sum "
                  << fixed(sum, 4) << ", " << (cov == ShareCoverage::complete ? "complete" : "partial")
                  << " coverage)\nmargins (" << a.method << "):\n";
        for (const auto& r : rows) {
            const double margin = profit_margin(r.total_block_value, r.total_payments, a.method);
            const bool flagged = r.has_reported_margin && std::abs(margin - r.reported_margin) > 0.01;
            std::cout << "  " << r.builder << " " << fixed(margin * 100.0, 2) << "%";
            if (r.has_reported_margin)
                std::cout << " (reported " << fixed(r.reported_margin * 100.0, 2) << "%"
                          << (flagged ? ", differs by more than 1 point" : "") << ")";
            std::cout << "\n";
            json row = {{"builder", r.builder}, {"market_share", r.market_share}, {"margin", margin}, {"flagged", flagged}};
            row["reported_margin"] = r.has_reported_margin ? json(r.reported_margin) : json(nullptr);
            out_rows.push_back(row);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return config_error;
    }

    const fs::path dir(a.out);
    ensure_dir(dir);
    json report = {{"hhi", index},
                   {"share_sum", sum},
                   {"coverage", cov == ShareCoverage::complete ? "complete" : "partial"},
                   {"margin_method", a.method},
                   {"builders", out_rows}};
    write_file(dir / "metrics.json", report.dump(2) + "\n");
    write_manifest(dir, "metrics", sha256_hex(text + "\nmethod=" + a.method + "\ncoverage=" + a.coverage), 0, started,
                   {"metrics.json"});
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Builder market simulator: share dynamics, auction equilibria and fairness metrics"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "run a scenario ensemble");
    s->add_option("config", sim.config_path, "flat key = value config file (omit to use --scenario)");
    s->add_option("--scenario", sim.scenario, "baseline | collaboration | timing_game | multi_builder")->capture_default_str();
    s->add_option("--seed", sim.seed, "master seed");
    s->add_option("--out", sim.out, "output directory")->capture_default_str();
    s->add_option("--override", sim.overrides, "key=value, repeatable");
    s->add_option("--builders", sim.builders, "builder count for multi_builder")->capture_default_str();
    s->add_option("--trajectories", sim.trajectories, "repetitions written to trajectories.csv")->capture_default_str();
    s->add_option("--workers", sim.workers, "worker threads (0 = all cores)")->capture_default_str();

    EquilibriumArgs eqa;
    auto* e = app.add_subcommand("equilibrium", "solve the H^m vs H^n first-price equilibrium");
    e->add_option("--m", eqa.m, "first cartel size")->capture_default_str();
    e->add_option("--n", eqa.n, "second cartel size")->capture_default_str();
    e->add_option("--reserve", eqa.reserve, "reserve price")->capture_default_str();
    e->add_option("--grid", eqa.grid, "bid grid points")->capture_default_str();
    e->add_option("--samples", eqa.samples, "Monte Carlo samples for the checks")->capture_default_str();
    e->add_option("--seed", eqa.seed, "Monte Carlo seed")->capture_default_str();
    e->add_option("--out", eqa.out, "output directory")->capture_default_str();

    MetricsArgs ma;
    auto* m = app.add_subcommand("metrics", "HHI and profit margins from a builder-statistics CSV");
    m->add_option("--input", ma.input, "CSV: builder, blocks, market_share, total_payments, total_block_value")->required();
    m->add_option("--method", ma.method, "value_relative | payment_relative")->capture_default_str();
    m->add_option("--coverage", ma.coverage, "auto | complete | partial")->capture_default_str();
    m->add_option("--out", ma.out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : config_error;
    }

    try {
        if (*s) return cmd_simulate(sim);
        if (*e) return cmd_equilibrium(eqa);
        if (*m) return cmd_metrics(ma);
    } catch (const IoError& err) {
        std::cerr << "I/O error: " << err.what() << "\n";
        return io_error;
    }
    return ok;
}

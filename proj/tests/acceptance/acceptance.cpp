// Acceptance criteria 1-13. Usage: pbsim_acceptance [n ...]; no argument runs all.
// Prints one "criterion n: PASS|FAIL ..." line per criterion; exit status 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pbsim/config_io.hpp"
#include "pbsim/distribution.hpp"
#include "pbsim/equilibrium.hpp"
#include "pbsim/fairness.hpp"
#include "pbsim/flow_dynamics.hpp"
#include "pbsim/runner.hpp"
#include "pbsim/sa_analytic.hpp"

using namespace pbsim;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string fmt(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* drop_overrides[] = {"flow_model.drop_prob=0", "flow_model.drop_prob=0.5", "flow_model.drop_prob=1"};
const double drop_values[] = {0.0, 0.5, 1.0};

// Baseline ensembles per p, computed once per process.
const EnsembleResult& baseline(int idx, double* elapsed = nullptr) {
    static std::map<int, std::pair<EnsembleResult, double>> cache;
    auto it = cache.find(idx);
    if (it == cache.end()) {
        const auto t0 = std::chrono::steady_clock::now();
        auto r = run_ensemble(build_scenario(ScenarioKind::baseline, {drop_overrides[idx]}));
        it = cache.emplace(idx, std::make_pair(std::move(r), seconds_since(t0))).first;
    }
    if (elapsed) *elapsed = it->second.second;
    return it->second.first;
}

Outcome fairness_failure() {
    Outcome o;
    for (int i = 0; i < 3; ++i) {
        double secs = 0;
        const auto& r = baseline(i, &secs);
        const auto& f = r.fairness;
        o.require(f.empirical_prob < 0.9 && secs < 120.0,
                  "p=" + fmt(drop_values[i], 1) + " Pr[lambda in [" + fmt(f.fair_low, 2) + "," + fmt(f.fair_high, 2) +
                      "]]=" + fmt(f.empirical_prob, 3) + " in " + fmt(secs, 1) + "s");
    }
    return o;
}

Outcome absorption_dynamics() {
    Outcome o;
    for (int i = 0; i < 3; ++i) {
        const auto& r = baseline(i);
        const double frac = static_cast<double>(r.absorption.count) / static_cast<double>(r.repetitions);
        const bool med_ok = r.absorption.median && *r.absorption.median >= 1000 && *r.absorption.median <= 6000;
        o.require(frac >= 0.5 && med_ok, "p=" + fmt(drop_values[i], 1) + " absorbed " + fmt(frac, 3) + ", median " +
                                             (r.absorption.median ? fmt(*r.absorption.median, 1) : "none"));
    }
    return o;
}

Outcome slowdown() {
    Outcome o;
    const auto& p0 = baseline(0);
    const auto& p1 = baseline(2);
    const auto at = [](const EnsembleResult& r, long long round) {
        const auto pos = std::find(r.rounds_axis.begin(), r.rounds_axis.end(), round) - r.rounds_axis.begin();
        return std::make_pair(r.mean_lambda[pos], r.se_lambda[pos]);
    };
    const auto [m0, s0] = at(p0, 2000);
    const auto [m1, s1] = at(p1, 2000);
    const double se = std::sqrt(s0 * s0 + s1 * s1);
    o.require(m1 - m0 > 3 * se, "mean lambda at 2000: p=0 " + fmt(m0, 4) + ", p=1 " + fmt(m1, 4) + ", gap " +
                                    fmt((m1 - m0) / se, 1) + " SE");
    return o;
}

Outcome multi_builder() {
    Outcome o;
    for (int K : {2, 3, 4, 10}) {
        ScenarioParams p;
        p.multi_builder_count = K;
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_ensemble(build_scenario(ScenarioKind::multi_builder, {}, p));
        long long poles = 0, ones = 0;
        for (const auto& rep : r.per_repetition) {
            const double z = rep.final_shares[0];
            if (z <= 1e-6 || z >= 1 - 1e-6) ++poles;
            if (z >= 1 - 1e-6) ++ones;
        }
        const double frac = static_cast<double>(poles) / static_cast<double>(r.repetitions);
        o.require(frac >= 0.95, "K=" + std::to_string(K) + " at a pole " + fmt(frac, 3) + " (at 1: " +
                                    std::to_string(ones) + "), mean lambda " + fmt(r.final_mean_lambda[0], 3) + ", " +
                                    fmt(seconds_since(t0), 0) + "s");
    }
    return o;
}

const ValueDistribution H = ValueDistribution::power(1);

Outcome solver_oracles() {
    Outcome o;
    for (int m : {1, 2}) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto eq = solve_equilibrium(cartel(H, m), cartel(H, m), 0.0);
        const double secs = seconds_since(t0);
        const double slope = (m + 1.0) / m;
        double dev = 0;
        for (std::size_t k = 0; k < eq.bid_grid.size(); ++k)
            dev = std::max({dev, std::abs(eq.phi_i[k] - slope * eq.bid_grid[k]),
                            std::abs(eq.phi_j[k] - slope * eq.bid_grid[k])});
        o.require(dev < 1e-3 && eq.residual_max < 1e-4 && secs < 10.0,
                  "H^" + std::to_string(m) + ": sup|phi - " + fmt(slope, 1) + "b| = " + fmt(dev * 1e6, 2) +
                      "e-6, residual " + fmt(eq.residual_max * 1e6, 2) + "e-6, " + fmt(secs, 3) + "s");
    }
    return o;
}

Outcome ordering_dominance() {
    Outcome o;
    const auto Fi = cartel(H, 3);
    const auto eq = solve_equilibrium(Fi, H, 0.0);
    std::size_t interior = 0, ordered = 0, dominated = 0;
    for (std::size_t k = 1; k + 1 < eq.bid_grid.size(); ++k) {
        ++interior;
        if (eq.phi_i[k] > eq.phi_j[k]) ++ordered;
        if (Fi.cdf(eq.phi_i[k]) < H.cdf(eq.phi_j[k])) ++dominated;
    }
    o.require(ordered == interior, "phi_i > phi_j at " + std::to_string(ordered) + "/" + std::to_string(interior));
    o.require(dominated == interior,
              "F_i(phi_i) < F_j(phi_j) at " + std::to_string(dominated) + "/" + std::to_string(interior));
    Rng rng(stream_seed(42, 6));
    const auto v = verify_equilibrium(eq, Fi, H, 100000, rng);
    o.require(v.strong_win_prob - 0.5 > 3 * v.strong_win_se,
              "strong win prob " + fmt(v.strong_win_prob, 4) + " +- " + fmt(v.strong_win_se, 4));
    return o;
}

Outcome revenue_ordering() {
    Outcome o;
    Rng rng(stream_seed(42, 7));
    std::map<std::pair<int, int>, double> R;
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {3, 1}, {3, 3}, {4, 2}, {5, 1}})
        R[{m, n}] = expected_revenue(solve_equilibrium(cartel(H, m), cartel(H, n), 0.0), m, n, H, 200000, rng).revenue;
    o.require(std::abs(R[{1, 1}] - 1.0 / 3) <= 0.005, "R(1,1)=" + fmt(R[{1, 1}], 5));
    o.require(std::abs(R[{2, 2}] - 8.0 / 15) <= 0.005, "R(2,2)=" + fmt(R[{2, 2}], 5));
    o.require(R[{2, 2}] - R[{3, 1}] > 0.01, "R(3,1)=" + fmt(R[{3, 1}], 5));
    o.require(R[{3, 3}] - R[{4, 2}] > 0.01 && R[{4, 2}] - R[{5, 1}] > 0.01,
              "R(3,3)=" + fmt(R[{3, 3}], 5) + " > R(4,2)=" + fmt(R[{4, 2}], 5) + " > R(5,1)=" + fmt(R[{5, 1}], 5));
    return o;
}

Outcome drift_fixed_points() {
    Outcome o;
    const auto c = classify_fixed_points(1000);
    const bool zeros_ok = c.zeros.size() == 3 && std::abs(c.zeros[0]) < 1e-10 && std::abs(c.zeros[1] - 0.5) < 1e-10 &&
                          std::abs(c.zeros[2] - 1.0) < 1e-10 &&
                          c.stability == std::vector<Stability>{Stability::stable, Stability::unstable, Stability::stable};
    std::string listed;
    for (std::size_t k = 0; k < c.zeros.size(); ++k)
        listed += (k ? ", " : "") + fmt(c.zeros[k], 3) + (c.stability[k] == Stability::stable ? " stable" : " unstable");
    o.require(zeros_ok, "zeros {" + listed + "}");
    double anti = 0, bound = 0;
    for (int k = 0; k <= 10000; ++k) {
        const double z = k / 10000.0;
        anti = std::max(anti, std::abs(drift(z) + drift(1 - z)));
        bound = std::max(bound, std::abs(drift(z)));
    }
    o.require(anti <= 1e-12, "antisymmetry error " + std::to_string(anti));
    o.require(bound <= 1.0, "max |f| " + fmt(bound, 4));
    return o;
}

Outcome sa_inequalities() {
    Outcome o;
    const long long steps = 100000;
    const double delta = 0.0002, ab = 1.0;
    Rng rng(stream_seed(42, 9));
    const auto tr = sa_iterate(0.6, SAMode::p0, delta, ab, steps, rng);
    const auto rep = sa_bounds_report(sa_steps(tr), keep_branch_bounds(delta, ab));
    long long gamma_bad = 0, noise_bad = 0;
    for (const auto& v : rep.violations) {
        if (v.condition.find("gamma") != std::string::npos) ++gamma_bad;
        if (v.condition.find("|U|") != std::string::npos) ++noise_bad;
    }
    o.require(rep.ok, "gamma-bound violations " + std::to_string(gamma_bad) + ", |U|>1 violations " +
                          std::to_string(noise_bad) + ", other " +
                          std::to_string(rep.violations.size() - gamma_bad - noise_bad));
    const auto c = coupled_traces(0.6, ab, delta, 0.5, steps, rng);
    const auto s = sandwich_check(c);
    o.require(s.ok, "sandwich violations " + std::to_string(s.violations) +
                        (s.first_violation ? " (first at step " + std::to_string(*s.first_violation) +
                                                 ", worst excess " + std::to_string(s.worst_excess) + ")"
                                           : ""));
    return o;
}

Outcome collaboration_ceiling() {
    Outcome o;
    const auto r = run_ensemble(build_scenario(ScenarioKind::collaboration));
    o.require(r.max_shares[0] == 0.9, "max Z_0 = " + format_double(r.max_shares[0]));
    o.require(r.full_monopolies == 0, "full monopolies " + std::to_string(r.full_monopolies));
    return o;
}

Outcome timing_game() {
    Outcome o;
    const std::vector<std::string> reps{"repetitions=200"};
    const auto base = run_ensemble(build_scenario(ScenarioKind::baseline, reps));
    const auto boost = run_ensemble(build_scenario(ScenarioKind::timing_game, reps));
    // absorption round of builder 0, censored at T
    const auto time0 = [](const RepetitionSummary& s, long long T) {
        return s.absorption && s.absorption->builder == 0 ? static_cast<double>(s.absorption->round)
                                                           : static_cast<double>(T);
    };
    const std::size_t n = base.per_repetition.size();
    double sum = 0, sq = 0, mb = 0, mt = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double b = time0(base.per_repetition[r], base.rounds);
        const double t = time0(boost.per_repetition[r], boost.rounds);
        mb += b;
        mt += t;
        sum += b - t;
        sq += (b - t) * (b - t);
    }
    const double mean = sum / n, sd = std::sqrt((sq - n * mean * mean) / (n - 1)), se = sd / std::sqrt(n);
    o.require(mean > 3 * se, "mean absorption baseline " + fmt(mb / n, 1) + ", boosted " + fmt(mt / n, 1) +
                                 ", paired gap " + fmt(mean, 1) + " = " + fmt(mean / se, 1) + " SE");
    return o;
}

Outcome metrics() {
    Outcome o;
    std::ifstream in(PBSIM_TEST_DATA "/builder_table.csv");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::vector<double> shares;
    for (const auto& row : parse_builder_csv(ss.str())) shares.push_back(row.market_share);
    const double h = hhi(shares, ShareCoverage::partial);
    o.require(std::abs(h - 0.3272) <= 5e-4, "builder table HHI " + fmt(h, 5));
    const double mono = hhi(std::vector<double>{1.0, 0.0, 0.0, 0.0});
    o.require(mono == 1.0, "monopoly HHI " + fmt(mono, 1));

    std::mt19937_64 g(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0;
    for (int set = 0; set < 1000; ++set) {
        FairnessSpec spec{0.3 * u(g), 0.3 * u(g), u(g)};
        std::vector<double> xs(1 + g() % 200);
        for (auto& x : xs) x = u(g) < 0.05 ? (u(g) < 0.5 ? spec.fair_low() : spec.fair_high()) : u(g);
        long long inside = 0;
        for (double x : xs)
            if (x >= spec.fair_low() && x <= spec.fair_high()) ++inside;
        const double prob = static_cast<double>(inside) / static_cast<double>(xs.size());
        const auto rep = robust_fairness(xs, spec);
        if (rep.empirical_prob == prob && rep.satisfied == (prob >= 1 - spec.delta)) ++agree;
    }
    o.require(agree == 1000, "robust_fairness agrees with counting on " + std::to_string(agree) + "/1000 sets");
    return o;
}

Outcome determinism() {
    Outcome o;
    const std::vector<std::pair<ScenarioKind, std::vector<std::string>>> runs{
        {ScenarioKind::baseline, {"repetitions=64"}},
        {ScenarioKind::collaboration, {"repetitions=64"}},
        {ScenarioKind::timing_game, {"repetitions=64"}},
        {ScenarioKind::multi_builder, {"repetitions=8"}},
    };
    for (const auto& [kind, ov] : runs) {
        const auto config = build_scenario(kind, ov);
        std::vector<std::string> csv, js;
        for (unsigned workers : {1u, 2u, 1u}) {
            EnsembleOptions opt;
            opt.workers = workers;
            opt.keep_trajectories = 4;
            const auto r = run_ensemble(config, opt);
            std::ostringstream out;
            write_trajectories_csv(out, r.trajectories, config.builders.size());
            csv.push_back(out.str());
            js.push_back(ensemble_json(r));
        }
        const bool same = csv[0] == csv[1] && csv[1] == csv[2] && js[0] == js[1] && js[1] == js[2];
        o.require(same, to_string(kind) + " (" + std::to_string(csv[0].size() + js[0].size()) + " bytes)");
    }
    return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
    {"fairness fails at round 6000 for p in {0, 0.5, 1}", fairness_failure},
    {"at least half the runs absorb, median round in [1000, 6000]", absorption_dynamics},
    {"p=0 mean lambda at round 2000 below p=1 by 3 SE", slowdown},
    {"multi-builder runs end within 1e-6 of a pole (95%)", multi_builder},
    {"symmetric equilibria match 2b and 1.5b", solver_oracles},
    {"H^3 vs H ordering, dominance and win probability", ordering_dominance},
    {"revenue values and ordering", revenue_ordering},
    {"drift fixed points, antisymmetry and bound", drift_fixed_points},
    {"SA gamma bounds, |U| <= 1 and sandwich over 1e5 steps", sa_inequalities},
    {"collaboration ceiling 0.9, no full monopoly", collaboration_ceiling},
    {"timing boost shortens absorption", timing_game},
    {"HHI and robust fairness oracle", metrics},
    {"byte-identical outputs across worker counts", determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int a = 1; a < argc; ++a) which.push_back(std::atoi(argv[a]));
    if (which.empty())
        for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) which.push_back(n);

    bool all = true;
    for (int n : which) {
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "no criterion %d\n", n);
            return 2;
        }
        const auto& [title, run] = criteria[n - 1];
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        all = all && o.pass;
        std::printf("criterion %d: %s  %s: %s\n", n, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "pbsim/flow_dynamics.hpp"
#include "pbsim/rng.hpp"

namespace pbsim {

enum class SAMode {
    p0,  ///< every round keeps the loser's mass: gamma_n = delta / (a + b + n delta)
    p1,  ///< every round drops it: constant total mass, Z moves by +-delta / (a + b)
};

struct SATraceStep {
    long long t = 0;
    double gamma = 0.0;
    double z = 0.0;         ///< Z_t after the step
    bool x = false;         ///< X_t, the designated builder won
    double win_prob = 0.0;  ///< analytic_win_prob(Z_{t-1})
    double drift = 0.0;     ///< f(Z_{t-1})
};

struct SATrace {
    SAMode mode = SAMode::p0;
    double a_plus_b = 1.0;
    double delta = 0.0;
    double z0 = 0.0;
    std::vector<SATraceStep> steps;
};

/// Iterates the recursion with X ~ Bernoulli(analytic_win_prob(Z)), clamping Z to [0, 1].
SATrace sa_iterate(double z0, SAMode mode, double delta, double a_plus_b, long long steps, Rng& rng);

/// (n, gamma_n, U_n, f(Z_{n-1})) per step, U_n = X_n - analytic_win_prob(Z_{n-1}).
std::vector<SAStep> sa_steps(const SATrace& trace);

/// Three share processes driven by one win/loss history: Z' (always drop),
/// Z'' (always keep) and the mixed process whose branch follows `drops`.
struct CoupledTraces {
    std::vector<double> z_drop;   ///< Z'
    std::vector<double> z_keep;   ///< Z''
    std::vector<double> z_mixed;  ///< Z
    std::vector<bool> x;
    std::vector<bool> drop;
};

/// Replays a given history; index 0 of each trace is the start value.
CoupledTraces coupled_traces(double z0, double a_plus_b, double delta, const std::vector<bool>& x,
                             const std::vector<bool>& drop);

/// Random history: X ~ Bernoulli(analytic_win_prob(Z_mixed)), drop ~ Bernoulli(p).
CoupledTraces coupled_traces(double z0, double a_plus_b, double delta, double p, long long steps, Rng& rng);

struct SandwichReport {
    bool ok = true;
    long long violations = 0;
    std::optional<long long> first_violation;
    double worst_excess = 0.0;  ///< largest distance of Z outside [min, max]
};

/// Checks min(Z', Z'') <= Z <= max(Z', Z'') (tolerance 1e-12) at every step.
SandwichReport sandwich_check(const CoupledTraces& traces);

/// Lower bound K_L on E[U^2 | Z] for |Z - 1/2| <= eps:
/// ((1/2 - eps) / (1 + 2 eps)) ((1/2 + 3 eps) / (1 + 2 eps)).
double noise_floor(double eps = 0.05);

/// Exports traces with the trajectory CSV schema (K = 2, empty value and bid columns).
void write_sa_traces_csv(std::ostream& out, std::span<const SATrace> traces);

}  // namespace pbsim

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pbsim/market.hpp"
#include "pbsim/rng.hpp"

namespace pbsim {

/// Mean drift f(z) = E[X | z] - z of the two-builder share process:
///   z / (2(1 - z)) - z          for z <= 1/2
///   1 - (1 - z) / (2z) - z      otherwise.
/// Precondition z in [0, 1]; throws std::domain_error otherwise.
double drift(double z);

/// Win probability of the builder holding share z under the analytic model,
/// z + drift(z) clamped to [0, 1].
double analytic_win_prob(double z);

/// Deterministic share update for a known branch.
///
/// Drop branch: the winner gains up to `delta` of absolute mass taken from the
/// losers in proportion to their shares; total mass is unchanged.
/// Keep branch: the winner gains `delta` of new mass and the total grows by `delta`.
/// Afterwards loyal floors are enforced, shares within 1e-12 of a pole are
/// snapped, and the largest share absorbs the rounding so the sum is exactly 1.
/// A full monopoly (one share at 1) is absorbing and returned unchanged.
MarketState apply_share_update(const MarketState& state, BuilderIndex winner, double delta,
                               bool drop_branch, std::span<const double> loyal_shares);

/// One stochastic share update: a Bernoulli(drop_prob) draw picks the branch.
MarketState step_shares(const MarketState& state, BuilderIndex winner, const FlowModel& flow_model,
                        std::span<const double> loyal_shares, Rng& rng);

enum class Stability { stable, unstable };

struct DriftClassification {
    std::vector<double> zeros;
    std::vector<Stability> stability;
};

using DriftFn = std::function<double(double)>;

/// Zeros of `f` on [0, 1] by a sign-change scan on `resolution` + 1 points
/// plus bisection, labelled by the sign of f(x)(x - q) on a punctured
/// neighbourhood of radius 1e-3. Requires resolution >= 100.
DriftClassification classify_fixed_points(int resolution, const DriftFn& f = drift);

/// Constants of a stochastic approximation recursion
/// Z_{n+1} - Z_n = gamma_{n+1} (f(Z_n) + U_{n+1}).
struct SABounds {
    double c_l = 0.0;
    double c_u = 1.0;
    double K_u = 1.0;
    double K_f = 1.0;
    double K_e = 0.0;
};

/// Bounds for the keep-branch process: c_l = delta / (a + b + delta), c_u = K_u = K_f = 1, K_e = 0.
SABounds keep_branch_bounds(double delta, double a_plus_b);

struct SAStep {
    long long n = 0;  ///< 1-based step index
    double gamma = 0.0;
    double noise = 0.0;  ///< U_n
    double drift = 0.0;  ///< f(Z_{n-1})
};

struct SAViolation {
    long long n = 0;
    std::string condition;
};

struct SABoundsReport {
    SABounds bounds;
    bool ok = true;
    std::vector<SAViolation> violations;
    double mean_gamma_noise = 0.0;
    double se_gamma_noise = 0.0;
};

/// Checks the four stochastic-approximation conditions along a recorded
/// trajectory. Condition 4 is checked empirically: the mean of gamma * U must
/// lie within 3 standard errors of zero.
SABoundsReport sa_bounds_report(std::span<const SAStep> steps, const SABounds& bounds);

}  // namespace pbsim

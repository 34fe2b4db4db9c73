#include "pbsim/flow_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pbsim {

namespace {
constexpr double kSnap = 1e-12;
}

double drift(double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("drift: z outside [0,1]");
    if (z <= 0.5) return z / (2.0 * (1.0 - z)) - z;
    return 1.0 - (1.0 - z) / (2.0 * z) - z;
}

double analytic_win_prob(double z) {
    return std::clamp(z + drift(z), 0.0, 1.0);
}

MarketState apply_share_update(const MarketState& state, BuilderIndex winner, double delta,
                               bool drop_branch, std::span<const double> loyal_shares) {
    const std::size_t K = state.shares.size();
    if (winner >= K) throw std::out_of_range("apply_share_update: winner index");
    if (!loyal_shares.empty() && loyal_shares.size() != K)
        throw std::invalid_argument("apply_share_update: one loyal share per builder");
    auto loyal = [&](std::size_t k) { return loyal_shares.empty() ? 0.0 : loyal_shares[k]; };

    for (std::size_t k = 0; k < K; ++k)
        if (state.shares[k] == 1.0) return state;

    MarketState next = state;
    const double total = state.total_mass;
    std::vector<double> mass(K);
    for (std::size_t k = 0; k < K; ++k) mass[k] = state.shares[k] * total;

    if (drop_branch) {
        double losers = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            if (k != winner) losers += mass[k];
        const double removed = std::min(delta, losers);
        if (removed > 0.0) {
            for (std::size_t k = 0; k < K; ++k)
                if (k != winner) mass[k] = std::max(0.0, mass[k] - removed * mass[k] / losers);
            mass[winner] += removed;
        }
    } else {
        mass[winner] += delta;
        next.total_mass = total + delta;
    }

    auto& z = next.shares;
    for (std::size_t k = 0; k < K; ++k) z[k] = std::clamp(mass[k] / next.total_mass, 0.0, 1.0);

    // Loyal floors: lift anyone below its floor, funded by the excess above floors.
    double deficit = 0.0, excess = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        if (z[k] < loyal(k)) {
            deficit += loyal(k) - z[k];
            z[k] = loyal(k);
        } else {
            excess += z[k] - loyal(k);
        }
    }
    if (deficit > 0.0 && excess > 0.0) {
        for (std::size_t k = 0; k < K; ++k) {
            if (z[k] > loyal(k)) z[k] -= deficit * (z[k] - loyal(k)) / excess;
        }
    }

    for (std::size_t k = 0; k < K; ++k)
        if (z[k] < kSnap && loyal(k) == 0.0) z[k] = 0.0;

    const auto top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    double others = 0.0;
    for (std::size_t k = 0; k < K; ++k)
        if (k != top) others += z[k];
    if (others > 1.0) {
        for (std::size_t k = 0; k < K; ++k)
            if (k != top) z[k] /= others;
        others = 1.0;
    }
    z[top] = 1.0 - others;
    if (z[top] > 1.0 - kSnap && others < kSnap) {
        z[top] = 1.0;
        for (std::size_t k = 0; k < K; ++k)
            if (k != top) z[k] = 0.0;
    }
    return next;
}

MarketState step_shares(const MarketState& state, BuilderIndex winner, const FlowModel& flow_model,
                        std::span<const double> loyal_shares, Rng& rng) {
    const bool drop = bernoulli(rng, flow_model.drop_prob);
    return apply_share_update(state, winner, flow_model.delta, drop, loyal_shares);
}

DriftClassification classify_fixed_points(int resolution, const DriftFn& f) {
    if (resolution < 100) throw std::invalid_argument("classify_fixed_points: resolution < 100");
    constexpr double kZeroTol = 1e-12;
    constexpr double kRadius = 1e-3;

    std::vector<double> zeros;
    auto add_zero = [&](double q) {
        if (std::abs(f(q)) >= kZeroTol) return;
        for (double z : zeros)
            if (std::abs(z - q) < 1e-8) return;
        zeros.push_back(q);
    };

    const double h = 1.0 / resolution;
    double x_prev = 0.0, f_prev = f(0.0);
    if (std::abs(f_prev) < kZeroTol) add_zero(0.0);
    for (int i = 1; i <= resolution; ++i) {
        const double x = i == resolution ? 1.0 : i * h;
        const double fx = f(x);
        if (std::abs(fx) < kZeroTol) {
            add_zero(x);
        } else if (std::abs(f_prev) >= kZeroTol && (f_prev < 0.0) != (fx < 0.0)) {
            double lo = x_prev, hi = x, flo = f_prev;
            // run to full precision: the 1e-10 bracket alone leaves |f| near 1e-10
            for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const double fm = f(mid);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            add_zero(std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi);
        }
        x_prev = x;
        f_prev = fx;
    }
    std::sort(zeros.begin(), zeros.end());

    DriftClassification out;
    out.zeros = zeros;
    for (double q : zeros) {
        bool stable = true;
        for (int side : {-1, 1}) {
            for (double frac : {0.01, 0.1, 0.5, 1.0}) {
                const double x = q + side * frac * kRadius;
                if (x < 0.0 || x > 1.0) continue;
                if (!(f(x) * (x - q) < 0.0)) stable = false;
            }
        }
        out.stability.push_back(stable ? Stability::stable : Stability::unstable);
    }
    return out;
}

SABounds keep_branch_bounds(double delta, double a_plus_b) {
    SABounds b;
    b.c_l = delta / (a_plus_b + delta);
    b.c_u = 1.0;
    b.K_u = 1.0;
    b.K_f = 1.0;
    b.K_e = 0.0;
    return b;
}

SABoundsReport sa_bounds_report(std::span<const SAStep> steps, const SABounds& bounds) {
    SABoundsReport rep;
    rep.bounds = bounds;
    auto fail = [&](long long n, std::string what) {
        rep.ok = false;
        rep.violations.push_back({n, std::move(what)});
    };
    double sum = 0.0, sumsq = 0.0;
    for (const auto& s : steps) {
        const double n = static_cast<double>(s.n);
        // relative slack absorbs the rounding in gamma = delta / (a + b + n delta)
        const double slack = 1e-12;
        if (s.gamma < bounds.c_l / n * (1.0 - slack)) fail(s.n, "gamma below c_l/n");
        if (s.gamma > bounds.c_u / n * (1.0 + slack)) fail(s.n, "gamma above c_u/n");
        if (std::abs(s.noise) > bounds.K_u) fail(s.n, "|U| above K_u");
        if (std::abs(s.drift) > bounds.K_f) fail(s.n, "|f| above K_f");
        const double gu = s.gamma * s.noise;
        sum += gu;
        sumsq += gu * gu;
    }
    if (!steps.empty()) {
        const double n = static_cast<double>(steps.size());
        rep.mean_gamma_noise = sum / n;
        const double var = n > 1 ? std::max(0.0, (sumsq - n * rep.mean_gamma_noise * rep.mean_gamma_noise) / (n - 1)) : 0.0;
        rep.se_gamma_noise = std::sqrt(var / n);
        const double bound = 3.0 * rep.se_gamma_noise;
        if (std::abs(rep.mean_gamma_noise) > bound && rep.se_gamma_noise > 0.0)
            fail(steps.back().n, "mean of gamma*U not within 3 standard errors of 0");
    }
    return rep;
}

}  // namespace pbsim

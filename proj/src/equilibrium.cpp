#include "pbsim/equilibrium.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "pbsim/config_io.hpp"

namespace pbsim {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::array<double, 2>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// below this gap to the diagonal the linear boundary patch takes over
constexpr double kPatchGap = 1e-4;
constexpr double kAgreeTol = 1e-10;
constexpr double kResidualTol = 1e-4;

struct System {
    const ValueDistribution* di;
    const ValueDistribution* dj;
    void operator()(const State& y, State& dy, double b) const {
        const double gi = std::max(y[0] - b, 1e-300);
        const double gj = std::max(y[1] - b, 1e-300);
        dy[0] = di->cdf_over_pdf(y[0]) / gj;
        dy[1] = dj->cdf_over_pdf(y[1]) / gi;
    }
};

bool valid(const State& y) { return std::isfinite(y[0]) && std::isfinite(y[1]); }

double gap(const State& y, double b) { return std::min(y[0] - b, y[1] - b); }

struct Shot {
    bool crossed = false;
    std::vector<State> at;  // per grid index; NaN where the shot never got
};

// Integrates backward from (b0, y0) toward `floor`. crossed means some phi_k - b
// reached (numerically) 0 above the floor or at it. When `grid` is given, the state is
// recorded at every grid point passed.
Shot shoot(const System& sys, double b0, State y0, double floor, const std::vector<double>* grid) {
    Shot shot;
    if (grid) shot.at.assign(grid->size(), State{kNaN, kNaN});
    std::ptrdiff_t next = -1;
    if (grid) {
        next = static_cast<std::ptrdiff_t>(std::upper_bound(grid->begin(), grid->end(), b0) - grid->begin()) - 1;
        if (next >= 0 && (*grid)[static_cast<std::size_t>(next)] == b0) {
            shot.at[static_cast<std::size_t>(next)] = y0;
            --next;
        }
    }
    if (gap(y0, b0) <= 0.0) {
        shot.crossed = true;
        return shot;
    }
    if (b0 <= floor) return shot;

    auto stepper = odeint::make_dense_output(1e-14, 1e-12, odeint::runge_kutta_dopri5<State>());
    stepper.initialize(y0, b0, -1e-6 * (b0 - floor));
    for (long steps = 0; steps < 2'000'000; ++steps) {
        const auto [t_old, t_new] = stepper.do_step(sys);
        (void)t_old;
        const double lowest = std::max(t_new, floor);
        while (next >= 0 && (*grid)[static_cast<std::size_t>(next)] >= lowest) {
            const double b = (*grid)[static_cast<std::size_t>(next)];
            State y;
            stepper.calc_state(b, y);
            if (!valid(y) || gap(y, b) <= 0.0) {
                shot.crossed = true;
                return shot;
            }
            shot.at[static_cast<std::size_t>(next)] = y;
            --next;
        }
        if (t_new <= floor) {
            State y;
            stepper.calc_state(floor, y);
            shot.crossed = !valid(y) || gap(y, floor) <= 0.0;
            return shot;
        }
        // a tangential approach to the diagonal stalls the step size instead of
        // crossing; the true solution keeps a gap of order (b - floor) / m
        const State& y = stepper.current_state();
        if (!valid(y) || gap(y, t_new) <= 1e-9 * (t_new - floor)) {
            shot.crossed = true;
            return shot;
        }
    }
    shot.crossed = true;
    return shot;
}

// Offsets from each end grow geometrically; the first step is ~5e-7 of the span.
// With a binding reserve phi - b grows like sqrt(b - b_low), so the lower half is
// made purely geometric from 1e-8 of the span to keep h / (b - b_low) small.
std::vector<double> make_grid(double lo, double hi, int n, bool sqrt_corner) {
    const double lambda = std::log(1e4);
    auto half = [&](double x) { return 0.5 * std::expm1(lambda * 2.0 * x) / std::expm1(lambda); };
    const int mid = (n - 1) / 2;
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double u = static_cast<double>(k) / (n - 1);
        double g = u <= 0.5 ? half(u) : 1.0 - half(1.0 - u);
        if (sqrt_corner && k <= mid)
            g = k == 0 ? 0.0 : 1e-8 * std::pow(0.5 / 1e-8, static_cast<double>(k - 1) / (mid - 1));
        grid[static_cast<std::size_t>(k)] = lo + (hi - lo) * g;
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

double golden_argmax(const std::function<double(double)>& h, double a, double b) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double hc = h(c), hd = h(d);
    while (b - a > 1e-10) {
        if (hc > hd) {
            b = d;
            d = c;
            hd = hc;
            c = b - invphi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + invphi * (b - a);
            hd = h(d);
        }
    }
    return 0.5 * (a + b);
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin());
    const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + w * (y[k] - y[k - 1]);
}

// Three-point derivative on a nonuniform grid.
double centred_derivative(const std::vector<double>& x, const std::vector<double>& y, std::size_t l) {
    const double h1 = x[l] - x[l - 1], h2 = x[l + 1] - x[l];
    return -h2 / (h1 * (h1 + h2)) * y[l - 1] + (h2 - h1) / (h1 * h2) * y[l] + h1 / (h2 * (h1 + h2)) * y[l + 1];
}

}  // namespace

double BidEquilibrium::value_for_bid(int side, double b) const {
    return interp(bid_grid, phi(side), b);
}

double BidEquilibrium::bid_for_value(int side, double v, bool* clamped) const {
    const auto& p = phi(side);
    const bool out = v < p.front() || v > p.back();
    if (clamped) *clamped = out;
    return interp(p, bid_grid, v);
}

double lower_bound_bid(const ValueDistribution& dist_i, const ValueDistribution& dist_j, double reserve) {
    const double bi = dist_i.support_low(), bj = dist_j.support_low();
    if (reserve > dist_j.support_high())
        throw NoCompetitionError("reserve " + format_double(reserve) + " exceeds the weak bidder's top value " +
                                 format_double(dist_j.support_high()));
    if (bj > bi) throw std::invalid_argument("lower_bound_bid: strong bidder's lower support is below the weak bidder's");
    if (bi == bj) return std::max(bi, reserve);
    if (bi <= reserve) return reserve;
    const double arg = golden_argmax([&](double b) { return (bi - b) * dist_j.cdf(b); }, bj, bi);
    return reserve > bj ? std::max(arg, reserve) : arg;
}

BidEquilibrium solve_equilibrium(const ValueDistribution& dist_i, const ValueDistribution& dist_j, double reserve,
                                 int grid_size) {
    if (grid_size < 512) throw std::invalid_argument("solve_equilibrium: grid_size must be at least 512");
    if (std::abs(dist_i.support_low() - dist_j.support_low()) > 1e-12)
        throw std::invalid_argument("solve_equilibrium: only a common lower support is supported");
    if (!dominates(dist_i, dist_j))
        throw std::invalid_argument("solve_equilibrium: side i must dominate side j");

    const double b_low = lower_bound_bid(dist_i, dist_j, reserve);
    const double ai = dist_i.support_high(), aj = dist_j.support_high();
    const State top{ai, aj};
    const System sys{&dist_i, &dist_j};
    std::vector<std::pair<double, double>> history;

    // stage 0: bisect the common top bid
    double lo = b_low + 1e-9 * (std::min(ai, aj) - b_low), hi = std::min(ai, aj);
    if (shoot(sys, lo, top, b_low, nullptr).crossed || !shoot(sys, hi, top, b_low, nullptr).crossed)
        throw SolverDivergence("shooting failed to bracket the top bid", {{lo, hi}});
    for (int it = 0; it < 200; ++it) {
        history.emplace_back(lo, hi);
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (shoot(sys, mid, top, b_low, nullptr).crossed ? hi : lo) = mid;
    }

    const auto grid = make_grid(b_low, lo, grid_size, b_low > dist_i.support_low());
    const std::size_t N = grid.size();
    std::vector<State> sol(N, State{kNaN, kNaN});
    Shot A = shoot(sys, lo, top, b_low, &grid);
    Shot B = shoot(sys, hi, top, b_low, &grid);

    // Later stages restart at the lowest point where the bracketing shots still
    // agree and bisect a perturbation of phi_j there.
    std::size_t start = N - 1, junction = 0;
    int stages = 1;
    for (;; ++stages) {
        std::size_t k = start;
        while (k > 0 && valid(A.at[k - 1]) && valid(B.at[k - 1]) &&
               std::max(std::abs(A.at[k - 1][0] - B.at[k - 1][0]), std::abs(A.at[k - 1][1] - B.at[k - 1][1])) <= kAgreeTol)
            --k;
        for (std::size_t l = k; l <= start; ++l) sol[l] = A.at[l];
        const double g = gap(A.at[k], grid[k]);
        if (k == 0 || g < kPatchGap) {
            junction = k;
            break;
        }
        if (stages > 1 && k == start) {
            if (g < 1e-3) {
                junction = k;
                break;
            }
            throw SolverDivergence("shooting stalled at b = " + format_double(grid[k]), history);
        }
        if (stages > 60) throw SolverDivergence("too many shooting stages", history);

        start = k;
        const State y0 = A.at[k];
        auto perturbed = [&](double eta) { return State{y0[0], y0[1] + eta}; };
        double eta_ok = 0.0, eta_bad = 0.0;
        for (double E = 1e-14 * std::max(1.0, std::abs(y0[1])); E < 1e-2; E *= 4.0) {
            if (shoot(sys, grid[k], perturbed(E), b_low, nullptr).crossed) {
                eta_bad = E;
                break;
            }
            if (shoot(sys, grid[k], perturbed(-E), b_low, nullptr).crossed) {
                eta_bad = -E;
                break;
            }
        }
        if (eta_bad == 0.0) throw SolverDivergence("no crossing perturbation at b = " + format_double(grid[k]), history);
        for (int it = 0; it < 200; ++it) {
            history.emplace_back(y0[1] + eta_ok, y0[1] + eta_bad);
            const double mid = 0.5 * (eta_ok + eta_bad);
            if (mid == eta_ok || mid == eta_bad) break;
            (shoot(sys, grid[k], perturbed(mid), b_low, nullptr).crossed ? eta_bad : eta_ok) = mid;
        }
        A = shoot(sys, grid[k], perturbed(eta_ok), b_low, &grid);
        B = shoot(sys, grid[k], perturbed(eta_bad), b_low, &grid);
        if (!valid(A.at[k])) throw SolverDivergence("restart state lost at b = " + format_double(grid[k]), history);
    }

    // chord from (b_low, b_low) to the junction covers the singular corner
    const State J = sol[junction];
    for (std::size_t l = 0; l < junction; ++l) {
        const double w = (grid[l] - b_low) / (grid[junction] - b_low);
        sol[l] = State{b_low + w * (J[0] - b_low), b_low + w * (J[1] - b_low)};
    }

    BidEquilibrium eq;
    eq.bid_grid = grid;
    eq.b_low = b_low;
    eq.b_high = grid.back();
    eq.reserve = reserve;
    eq.patch_end = junction;
    eq.stages = stages;
    eq.phi_i.resize(N);
    eq.phi_j.resize(N);
    for (std::size_t l = 0; l < N; ++l) {
        eq.phi_i[l] = sol[l][0];
        eq.phi_j[l] = sol[l][1];
    }
    eq.phi_i.back() = ai;
    eq.phi_j.back() = aj;
    for (std::size_t l = 1; l < N; ++l)
        if (!(eq.phi_i[l] > eq.phi_i[l - 1]) || !(eq.phi_j[l] > eq.phi_j[l - 1]))
            throw NonConvergence("inverse bid function not increasing at b = " + format_double(grid[l]), kNaN);

    eq.residual_max = equilibrium_residual(eq, dist_i, dist_j);
    if (!(eq.residual_max <= kResidualTol))
        throw NonConvergence("residual " + format_double(eq.residual_max) + " exceeds 1e-4", eq.residual_max);
    return eq;
}

double equilibrium_residual(const BidEquilibrium& eq, const ValueDistribution& dist_i,
                            const ValueDistribution& dist_j) {
    const auto& b = eq.bid_grid;
    double worst = 0.0;
    for (std::size_t l = std::max<std::size_t>(1, eq.patch_end + 1); l + 1 < b.size(); ++l) {
        const double di = centred_derivative(b, eq.phi_i, l);
        const double dj = centred_derivative(b, eq.phi_j, l);
        const double ri = di * (eq.phi_j[l] - b[l]) / dist_i.cdf_over_pdf(eq.phi_i[l]) - 1.0;
        const double rj = dj * (eq.phi_i[l] - b[l]) / dist_j.cdf_over_pdf(eq.phi_j[l]) - 1.0;
        worst = std::max({worst, std::abs(ri), std::abs(rj)});
        if (!std::isfinite(ri) || !std::isfinite(rj)) return std::numeric_limits<double>::infinity();
    }
    return worst;
}

VerificationReport verify_equilibrium(const BidEquilibrium& eq, const ValueDistribution& dist_i,
                                      const ValueDistribution& dist_j, long long samples, Rng& rng) {
    VerificationReport rep;
    const ValueDistribution* dist[2] = {&dist_i, &dist_j};
    auto fail = [&](std::string msg) { rep.failures.push_back(std::move(msg)); };

    rep.residual_max = equilibrium_residual(eq, dist_i, dist_j);
    rep.residual_ok = rep.residual_max <= kResidualTol;
    if (!rep.residual_ok) fail("residual " + format_double(rep.residual_max) + " exceeds 1e-4");

    // a side with value below phi(b_low) stays out of the auction
    auto sample_bid = [&](int side) {
        const double v = dist[side]->quantile(uniform01(rng));
        if (v < eq.phi(side).front()) return -std::numeric_limits<double>::infinity();
        return eq.bid_for_value(side, v);
    };

    for (int side = 0; side < 2; ++side) {
        const int other = 1 - side;
        std::vector<double> opp(static_cast<std::size_t>(samples));
        for (auto& x : opp) x = sample_bid(other);
        std::sort(opp.begin(), opp.end());
        auto win_prob = [&](double b) {
            if (b < eq.reserve) return 0.0;
            return static_cast<double>(std::lower_bound(opp.begin(), opp.end(), b) - opp.begin()) /
                   static_cast<double>(opp.size());
        };
        for (int q = 0; q < 50; ++q) {
            const double v = dist[side]->quantile((q + 0.5) / 50.0);
            if (v <= eq.phi(side).front()) continue;
            const double bstar = eq.bid_for_value(side, v);
            const double ustar = (v - bstar) * win_prob(bstar);
            double best = ustar, best_bid = bstar;
            for (int s = -10; s <= 10; ++s) {
                const double b = bstar * (1.0 + 0.01 * s);
                const double u = (v - b) * win_prob(b);
                if (u > best) {
                    best = u;
                    best_bid = b;
                }
            }
            const double gain = (best - ustar) / v;
            if (gain > rep.worst_gain) {
                rep.worst_gain = gain;
                rep.worst_side = side;
                rep.worst_value = v;
                rep.worst_bid = best_bid;
            }
        }
    }
    rep.best_response_ok = rep.worst_gain <= 1e-3;
    if (!rep.best_response_ok)
        fail("best response: side " + std::to_string(rep.worst_side) + " at value " + format_double(rep.worst_value) +
             " gains " + format_double(rep.worst_gain) + " v by bidding " + format_double(rep.worst_bid));

    for (std::size_t l = 1; l + 1 < eq.bid_grid.size(); ++l) {
        const double b = eq.bid_grid[l];
        const double Fi = dist_i.cdf(eq.phi_i[l]), Fj = dist_j.cdf(eq.phi_j[l]);
        if (rep.dominance_ok && Fi > Fj + 1e-9) {
            rep.dominance_ok = false;
            rep.dominance_violation_bid = b;
            fail("dominance F_i(phi_i) <= F_j(phi_j) fails at b = " + format_double(b));
        }
        if (rep.ordering_ok && eq.phi_i[l] < eq.phi_j[l] - 1e-9) {
            rep.ordering_ok = false;
            rep.ordering_violation_bid = b;
            fail("ordering phi_i >= phi_j fails at b = " + format_double(b));
        }
    }

    double wins = 0.0;
    for (long long s = 0; s < samples; ++s) {
        const double bi = sample_bid(0), bj = sample_bid(1);
        wins += bi > bj ? 1.0 : (bi == bj ? 0.5 : 0.0);
    }
    const double n = static_cast<double>(samples);
    rep.strong_win_prob = wins / n;
    rep.strong_win_se = std::sqrt(rep.strong_win_prob * (1.0 - rep.strong_win_prob) / n);
    return rep;
}

RevenueEstimate expected_revenue(const BidEquilibrium& eq, int m, int n, const ValueDistribution& base,
                                 long long samples, Rng& rng) {
    const auto Fi = cartel(base, m), Fj = cartel(base, n);
    RevenueEstimate est;
    const auto& b = eq.bid_grid;
    double prev = Fi.cdf(eq.phi_i[0]) * Fj.cdf(eq.phi_j[0]);
    for (std::size_t l = 1; l < b.size(); ++l) {
        const double G = Fi.cdf(eq.phi_i[l]) * Fj.cdf(eq.phi_j[l]);
        est.revenue += 0.5 * (b[l] + b[l - 1]) * (G - prev);
        prev = G;
    }

    auto cartel_bid = [&](int side, int size) {
        double v = base.support_low();
        for (int k = 0; k < size; ++k) v = std::max(v, base.quantile(uniform01(rng)));
        if (v < eq.phi(side).front()) return 0.0;
        return eq.bid_for_value(side, v);
    };
    double sum = 0.0, sumsq = 0.0;
    for (long long s = 0; s < samples; ++s) {
        const double x = std::max(cartel_bid(0, m), cartel_bid(1, n));
        sum += x;
        sumsq += x * x;
    }
    const double N = static_cast<double>(samples);
    est.mc_revenue = sum / N;
    est.mc_se = std::sqrt(std::max(0.0, sumsq / N - est.mc_revenue * est.mc_revenue) / (N - 1.0));
    if (std::abs(est.revenue - est.mc_revenue) > 2.0 * est.mc_se + 1e-12)
        throw NumericalIntegrityError("revenue " + format_double(est.revenue) + " vs Monte Carlo " +
                                      format_double(est.mc_revenue) + " +- " + format_double(est.mc_se));
    return est;
}

CrossingReport bid_cdf_crossings(const BidEquilibrium& eq_I, const ValueDistribution& i_I,
                                 const ValueDistribution& j_I, const BidEquilibrium& eq_II,
                                 const ValueDistribution& i_II, const ValueDistribution& j_II) {
    auto G = [](const BidEquilibrium& eq, const ValueDistribution& di, const ValueDistribution& dj, double b) {
        if (b >= eq.b_high) return 1.0;
        if (b <= eq.b_low) return di.cdf(eq.phi_i.front()) * dj.cdf(eq.phi_j.front());
        return di.cdf(eq.value_for_bid(0, b)) * dj.cdf(eq.value_for_bid(1, b));
    };
    auto GI = [&](double b) { return G(eq_I, i_I, j_I, b); };
    auto GII = [&](double b) { return G(eq_II, i_II, j_II, b); };
    auto dlog = [](const auto& g, double b, double h) { return (std::log(g(b + h)) - std::log(g(b - h))) / (2.0 * h); };

    CrossingReport rep;
    const double lo = std::max(eq_I.b_low, eq_II.b_low), hi = std::max(eq_I.b_high, eq_II.b_high);
    const int M = 4000;
    int below = 0;
    double prev_b = 0.0, prev_d = 0.0;
    for (int k = 1; k < M; ++k) {
        const double b = lo + (hi - lo) * k / M;
        const double d = GI(b) - GII(b);
        if (d < 0.0) ++below;
        if (k > 1 && ((prev_d < 0.0) != (d < 0.0)) && prev_d != 0.0) {
            const double bc = prev_b + (b - prev_b) * prev_d / (prev_d - d);
            rep.crossings.push_back(bc);
            const double h = 1e-6 * (hi - lo);
            if (dlog(GI, bc, h) >= dlog(GII, bc, h)) rep.violations.push_back(bc);
        }
        prev_b = b;
        prev_d = d;
    }
    rep.below_fraction = static_cast<double>(below) / (M - 1);
    return rep;
}

void write_equilibrium(std::ostream& out, const BidEquilibrium& eq) {
    out << "b_low " << format_double(eq.b_low) << '\n'
        << "b_high " << format_double(eq.b_high) << '\n'
        << "reserve " << format_double(eq.reserve) << '\n'
        << "residual_max " << format_double(eq.residual_max) << '\n'
        << "b phi_i phi_j\n";
    for (std::size_t l = 0; l < eq.bid_grid.size(); ++l)
        out << format_double(eq.bid_grid[l]) << ' ' << format_double(eq.phi_i[l]) << ' '
            << format_double(eq.phi_j[l]) << '\n';
}

BidEquilibrium read_equilibrium(std::istream& in) {
    BidEquilibrium eq;
    std::string key, line;
    auto header = [&](const char* name, double& v) {
        if (!(in >> key >> v) || key != name) throw std::runtime_error(std::string("equilibrium file: expected ") + name);
    };
    header("b_low", eq.b_low);
    header("b_high", eq.b_high);
    header("reserve", eq.reserve);
    header("residual_max", eq.residual_max);
    std::getline(in, line);
    std::getline(in, line);
    if (line.rfind("b phi_i phi_j", 0) != 0) throw std::runtime_error("equilibrium file: missing column header");
    double b, pi, pj;
    while (in >> b >> pi >> pj) {
        eq.bid_grid.push_back(b);
        eq.phi_i.push_back(pi);
        eq.phi_j.push_back(pj);
    }
    if (eq.bid_grid.size() < 2) throw std::runtime_error("equilibrium file: no rows");
    return eq;
}

}  // namespace pbsim

#include "pbsim/sa_analytic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "pbsim/config_io.hpp"

namespace pbsim {

SATrace sa_iterate(double z0, SAMode mode, double delta, double a_plus_b, long long steps, Rng& rng) {
    if (!(z0 >= 0.0 && z0 <= 1.0)) throw std::invalid_argument("sa_iterate: z0 outside [0,1]");
    if (steps < 1) throw std::invalid_argument("sa_iterate: steps must be at least 1");
    SATrace tr;
    tr.mode = mode;
    tr.a_plus_b = a_plus_b;
    tr.delta = delta;
    tr.z0 = z0;
    tr.steps.reserve(static_cast<std::size_t>(steps));

    double z = z0;
    double mass = z0 * a_plus_b, total = a_plus_b;  // p0 bookkeeping
    for (long long t = 1; t <= steps; ++t) {
        SATraceStep s;
        s.t = t;
        s.win_prob = analytic_win_prob(z);
        s.drift = drift(z);
        s.x = bernoulli(rng, s.win_prob);
        if (mode == SAMode::p0) {
            s.gamma = delta / (a_plus_b + static_cast<double>(t) * delta);
            if (s.x) mass += delta;
            total += delta;
            z = std::clamp(mass / total, 0.0, 1.0);
        } else {
            s.gamma = delta / a_plus_b;
            z = std::clamp(z + s.gamma * (s.x ? 1.0 : -1.0), 0.0, 1.0);
        }
        s.z = z;
        tr.steps.push_back(s);
    }
    return tr;
}

std::vector<SAStep> sa_steps(const SATrace& trace) {
    std::vector<SAStep> out;
    out.reserve(trace.steps.size());
    for (const auto& s : trace.steps)
        out.push_back(SAStep{s.t, s.gamma, (s.x ? 1.0 : 0.0) - s.win_prob, s.drift});
    return out;
}

namespace {

struct Coupled {
    double a_plus_b, delta;
    double zd;         // Z'
    double mk, Mk;     // Z'' masses
    double mm, Mm;     // mixed masses

    void step(bool x, bool drop) {
        zd = std::clamp(zd + delta / a_plus_b * (x ? 1.0 : -1.0), 0.0, 1.0);
        if (x) mk += delta;
        Mk += delta;
        if (drop) {
            mm = x ? std::min(Mm, mm + delta) : std::max(0.0, mm - delta);
        } else {
            if (x) mm += delta;
            Mm += delta;
        }
    }
    double keep() const { return mk / Mk; }
    double mixed() const { return mm / Mm; }
};

void push(CoupledTraces& c, const Coupled& s) {
    c.z_drop.push_back(s.zd);
    c.z_keep.push_back(s.keep());
    c.z_mixed.push_back(s.mixed());
}

}  // namespace

CoupledTraces coupled_traces(double z0, double a_plus_b, double delta, const std::vector<bool>& x,
                             const std::vector<bool>& drop) {
    if (x.size() != drop.size()) throw std::invalid_argument("coupled_traces: history lengths differ");
    Coupled s{a_plus_b, delta, z0, z0 * a_plus_b, a_plus_b, z0 * a_plus_b, a_plus_b};
    CoupledTraces c;
    c.x = x;
    c.drop = drop;
    push(c, s);
    for (std::size_t t = 0; t < x.size(); ++t) {
        s.step(x[t], drop[t]);
        push(c, s);
    }
    return c;
}

CoupledTraces coupled_traces(double z0, double a_plus_b, double delta, double p, long long steps, Rng& rng) {
    Coupled s{a_plus_b, delta, z0, z0 * a_plus_b, a_plus_b, z0 * a_plus_b, a_plus_b};
    CoupledTraces c;
    push(c, s);
    for (long long t = 0; t < steps; ++t) {
        const bool x = bernoulli(rng, analytic_win_prob(std::clamp(s.mixed(), 0.0, 1.0)));
        const bool d = bernoulli(rng, p);
        c.x.push_back(x);
        c.drop.push_back(d);
        s.step(x, d);
        push(c, s);
    }
    return c;
}

SandwichReport sandwich_check(const CoupledTraces& c) {
    SandwichReport rep;
    for (std::size_t t = 0; t < c.z_mixed.size(); ++t) {
        const double lo = std::min(c.z_drop[t], c.z_keep[t]), hi = std::max(c.z_drop[t], c.z_keep[t]);
        const double z = c.z_mixed[t];
        const double excess = std::max(lo - z, z - hi);
        if (excess > 1e-12) {
            rep.ok = false;
            ++rep.violations;
            if (!rep.first_violation) rep.first_violation = static_cast<long long>(t);
            rep.worst_excess = std::max(rep.worst_excess, excess);
        }
    }
    return rep;
}

double noise_floor(double eps) {
    return ((0.5 - eps) / (1.0 + 2.0 * eps)) * ((0.5 + 3.0 * eps) / (1.0 + 2.0 * eps));
}

void write_sa_traces_csv(std::ostream& out, std::span<const SATrace> traces) {
    out << "rep,round,z_0,z_1,lambda_0,lambda_1,winner,v_0,v_1,b_0,b_1,boost_fired\n";
    for (std::size_t r = 0; r < traces.size(); ++r) {
        const auto& tr = traces[r];
        out << r << ",0," << format_double(tr.z0) << ',' << format_double(1.0 - tr.z0) << ",0,0,,,,,,0\n";
        long long wins = 0;
        for (const auto& s : tr.steps) {
            if (s.x) ++wins;
            const double lam = static_cast<double>(wins) / static_cast<double>(s.t);
            out << r << ',' << s.t << ',' << format_double(s.z) << ',' << format_double(1.0 - s.z) << ','
                << format_double(lam) << ',' << format_double(1.0 - lam) << ',' << (s.x ? 0 : 1) << ",,,,,0\n";
        }
    }
}

}  // namespace pbsim

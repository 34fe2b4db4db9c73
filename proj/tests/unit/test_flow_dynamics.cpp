#include <doctest.h>

#include <cmath>
#include <vector>

#include "pbsim/flow_dynamics.hpp"

using namespace pbsim;
using doctest::Approx;

namespace {

MarketState two(double a, double b, double mass = 1.0) {
    MarketState s;
    s.shares = {a, b};
    s.total_mass = mass;
    s.win_counts = {0, 0};
    return s;
}

const std::vector<double> no_loyal{0.0, 0.0};

}  // namespace

TEST_CASE("drift examples") {
    CHECK(drift(0.0) == 0.0);
    CHECK(drift(0.5) == 0.0);
    CHECK(drift(0.25) == Approx(-1.0 / 12).epsilon(1e-12));
    CHECK(drift(0.75) == Approx(1.0 / 12).epsilon(1e-12));
    CHECK(drift(1.0) == 0.0);
    CHECK_THROWS_AS(drift(-0.01), std::domain_error);
    CHECK_THROWS_AS(drift(1.01), std::domain_error);
}

TEST_CASE("drift antisymmetry and bound on a 10001-point grid") {
    for (int k = 0; k <= 10000; ++k) {
        const double z = k / 10000.0;
        REQUIRE(std::abs(drift(z) + drift(1.0 - z)) <= 1e-12);
        REQUIRE(std::abs(drift(z)) <= 1.0);
    }
}

TEST_CASE("analytic win probability") {
    CHECK(analytic_win_prob(0.5) == 0.5);
    CHECK(analytic_win_prob(0.25) == Approx(1.0 / 6).epsilon(1e-12));
    CHECK(analytic_win_prob(1.0) == 1.0);
    CHECK(analytic_win_prob(0.0) == 0.0);
}

TEST_CASE("one-step mean matches drift") {
    Rng rng(7);
    for (double z : {0.2, 0.4, 0.7}) {
        const double p = analytic_win_prob(z);
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += (bernoulli(rng, p) ? 1.0 : 0.0) - z;
        const double se = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(sum / n - drift(z)) < 3 * se);
    }
}

TEST_CASE("drop branch example") {
    auto s = apply_share_update(two(0.6, 0.4), 0, 0.0002, true, no_loyal);
    CHECK(s.shares[0] == Approx(0.6002).epsilon(1e-12));
    CHECK(s.shares[1] == Approx(0.3998).epsilon(1e-12));
    CHECK(s.total_mass == 1.0);
    CHECK(s.shares[0] + s.shares[1] == 1.0);
}

TEST_CASE("keep branch example") {
    auto s = apply_share_update(two(0.6, 0.4), 0, 0.0002, false, no_loyal);
    CHECK(s.shares[0] == Approx(0.6002 / 1.0002).epsilon(1e-12));
    CHECK(s.shares[1] == Approx(0.4 / 1.0002).epsilon(1e-12));
    CHECK(s.total_mass == Approx(1.0002).epsilon(1e-15));
}

TEST_CASE("monopoly is absorbing") {
    for (BuilderIndex w : {0u, 1u})
        for (bool drop : {true, false}) {
            auto s = apply_share_update(two(1.0, 0.0), w, 0.0002, drop, no_loyal);
            CHECK(s.shares == std::vector<double>{1.0, 0.0});
        }
}

TEST_CASE("mass conservation per branch") {
    auto s = two(0.3, 0.7, 1.5);
    auto d = apply_share_update(s, 1, 0.01, true, no_loyal);
    CHECK(d.total_mass == 1.5);
    auto k = apply_share_update(s, 1, 0.01, false, no_loyal);
    CHECK(k.total_mass == Approx(1.51).epsilon(1e-15));
}

TEST_CASE("drop branch with many builders takes mass proportionally") {
    MarketState s;
    s.shares = {0.4, 0.3, 0.2, 0.1};
    s.win_counts = {0, 0, 0, 0};
    auto n = apply_share_update(s, 0, 0.01, true, std::vector<double>(4, 0.0));
    CHECK(n.shares[0] == Approx(0.41));
    CHECK(n.shares[1] == Approx(0.3 - 0.01 * 0.5));
    CHECK(n.shares[2] == Approx(0.2 - 0.01 * 2.0 / 6.0));
    CHECK(n.shares[3] == Approx(0.1 - 0.01 * 1.0 / 6.0));
    double sum = 0;
    for (double x : n.shares) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-15);
}

TEST_CASE("loyal floor caps the other builder") {
    const std::vector<double> loyal{0.0, 0.1};
    auto s = two(0.6, 0.4);
    Rng rng(3);
    FlowModel fm;
    fm.delta = 0.01;
    for (int i = 0; i < 200; ++i) {
        s = step_shares(s, 0, fm, loyal, rng);
        REQUIRE(s.shares[0] <= 0.9);
        REQUIRE(s.shares[1] >= 0.1);
    }
    CHECK(s.shares[0] == 0.9);
}

TEST_CASE("step_shares picks the branch by drop_prob") {
    FlowModel fm;
    Rng rng(11);
    fm.drop_prob = 1.0;
    CHECK(step_shares(two(0.6, 0.4), 0, fm, no_loyal, rng).total_mass == 1.0);
    fm.drop_prob = 0.0;
    CHECK(step_shares(two(0.6, 0.4), 0, fm, no_loyal, rng).total_mass == Approx(1.0002));
}

TEST_CASE("fixed points of the drift") {
    const auto c = classify_fixed_points(1000);
    REQUIRE(c.zeros.size() == 3);
    CHECK(c.zeros[0] == Approx(0.0).epsilon(1e-10));
    CHECK(c.zeros[1] == Approx(0.5).epsilon(1e-10));
    CHECK(c.zeros[2] == Approx(1.0).epsilon(1e-10));
    CHECK(c.stability == std::vector<Stability>{Stability::stable, Stability::unstable, Stability::stable});
    CHECK(drift(0.01) * 0.01 < 0);
    CHECK(drift(0.99) * (0.99 - 1.0) < 0);
}

TEST_CASE("fixed points of a user drift") {
    // f(z) = -(z - 0.3): one stable zero at 0.3
    const auto c = classify_fixed_points(200, [](double z) { return 0.3 - z; });
    REQUIRE(c.zeros.size() == 1);
    CHECK(c.zeros[0] == Approx(0.3).epsilon(1e-10));
    CHECK(c.stability[0] == Stability::stable);
    CHECK_THROWS(classify_fixed_points(50));
}

TEST_CASE("SA bounds on a keep-branch gamma sequence") {
    const double delta = 0.0002, ab = 1.0;
    std::vector<SAStep> steps;
    Rng rng(5);
    for (long long n = 1; n <= 20000; ++n) {
        const double x = bernoulli(rng, 0.5) ? 1.0 : 0.0;
        steps.push_back({n, delta / (ab + n * delta), x - 0.5, 0.0});
    }
    const auto rep = sa_bounds_report(steps, keep_branch_bounds(delta, ab));
    CHECK(rep.ok);
    CHECK(rep.violations.empty());
    CHECK(rep.bounds.c_l == Approx(delta / (ab + delta)));
}

TEST_CASE("SA bounds flag gamma = 2/n") {
    std::vector<SAStep> steps;
    for (long long n = 1; n <= 10; ++n) steps.push_back({n, 2.0 / n, 0.0, 0.0});
    const auto rep = sa_bounds_report(steps, SABounds{0.001, 1.0, 1.0, 1.0, 0.0});
    CHECK_FALSE(rep.ok);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations.front().n == 1);
}

TEST_CASE("SA bounds flag large noise") {
    std::vector<SAStep> steps{{1, 0.5, 1.5, 0.0}};
    const auto rep = sa_bounds_report(steps, SABounds{0.001, 1.0, 1.0, 1.0, 0.0});
    CHECK_FALSE(rep.ok);
}

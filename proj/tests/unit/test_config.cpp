#include <doctest.h>

#include <algorithm>

#include "pbsim/config_io.hpp"
#include "pbsim/runner.hpp"

using namespace pbsim;

namespace {

bool names(const ConfigError& e, const std::string& field, const std::string& text = "") {
    return std::any_of(e.violations().begin(), e.violations().end(), [&](const Violation& v) {
        return v.field == field && v.message.find(text) != std::string::npos;
    });
}

template <typename Fn>
ConfigError error_of(Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError thrown");
    return ConfigError({});
}

}  // namespace

TEST_CASE("baseline validates and starts from the warmup") {
    const auto c = build_scenario(ScenarioKind::baseline);
    CHECK(check(c).empty());
    CHECK(c.builders[0].initial_share == 0.6);
    CHECK(c.builders[1].initial_share == 0.4);
    CHECK(c.flow_model.delta == 0.0002);
    CHECK(c.strong_ratio == 0.7);
    CHECK(c.weak_ratio == 0.9);
    CHECK(c.rounds == 6000);
    CHECK(c.repetitions == 1000);
    CHECK(c.warmup_wins == std::vector<long long>{300, 200});
    const auto s = initial_state(c);
    CHECK(s.lambda(0) == 300.0 / 500.0);
    CHECK(s.lambda(1) == 200.0 / 500.0);
}

TEST_CASE("validation names the offending field") {
    auto c = build_scenario(ScenarioKind::baseline);
    c.builders[1].initial_share = 0.5;
    CHECK(names(error_of([&] { validate(c); }), "builders.initial_share", "shares sum ≠ 1"));

    c = build_scenario(ScenarioKind::baseline);
    c.flow_model.delta = -0.1;
    CHECK(names(error_of([&] { validate(c); }), "flow_model.delta", "delta must be nonnegative"));

    c = build_scenario(ScenarioKind::baseline);
    c.flow_model.poisson_rate = -1;
    CHECK(names(error_of([&] { validate(c); }), "flow_model.poisson_rate"));

    c = build_scenario(ScenarioKind::baseline);
    c.warmup_wins = {300, 100};
    CHECK(names(error_of([&] { validate(c); }), "warmup_wins", "warmup mismatch"));

    c = build_scenario(ScenarioKind::baseline);
    c.builders[0].timing_boost = 0.1;
    c.builders[1].timing_boost = 0.1;
    CHECK(names(error_of([&] { validate(c); }), "builders.timing_boost"));

    c = build_scenario(ScenarioKind::baseline);
    c.builders[1].loyal_share = 0.5;
    CHECK(names(error_of([&] { validate(c); }), "builders.1.loyal_share"));
}

TEST_CASE("serialization round trips byte for byte") {
    for (auto kind : {ScenarioKind::baseline, ScenarioKind::collaboration, ScenarioKind::timing_game,
                      ScenarioKind::multi_builder}) {
        const auto c = build_scenario(kind);
        const auto text = serialize(c);
        CHECK(serialize(parse_config(text)) == text);
        CHECK(config_digest(parse_config(text)) == config_digest(c));
    }
}

TEST_CASE("digest ignores key order, comments and spacing") {
    const auto c = build_scenario(ScenarioKind::collaboration);
    auto lines = serialize(c);
    std::vector<std::string> rows;
    std::string row;
    for (char ch : lines) {
        if (ch == '\n') {
            rows.push_back(row);
            row.clear();
        } else {
            row += ch;
        }
    }
    std::reverse(rows.begin(), rows.end());
    std::string shuffled = "# reversed\n\n";
    for (auto& r : rows) shuffled += "  " + r + "   \n";
    CHECK(config_digest(parse_config(shuffled)) == config_digest(c));
}

TEST_CASE("overrides") {
    auto c = build_scenario(ScenarioKind::baseline, {"flow_model.drop_prob=0.5", "repetitions = 20"});
    CHECK(c.flow_model.drop_prob == 0.5);
    CHECK(c.repetitions == 20);
    CHECK(names(error_of([&] { apply_override(c, "flow_model.dleta=1"); }), "flow_model.dleta", "unknown key"));
    CHECK(names(error_of([&] { apply_override(c, "rounds=abc"); }), "rounds"));
    CHECK_THROWS_AS(apply_override(c, "rounds"), ConfigError);
    CHECK_THROWS_AS(validate(build_scenario(ScenarioKind::baseline, {"flow_model.delta=-1"})), ConfigError);
}

TEST_CASE("unknown keys in a config file are errors") {
    auto text = serialize(build_scenario(ScenarioKind::baseline)) + "flow_model.rate = 3\n";
    CHECK(names(error_of([&] { parse_config(text); }), "flow_model.rate", "unknown key"));
    CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
}

TEST_CASE("built-in scenarios") {
    const auto col = build_scenario(ScenarioKind::collaboration);
    CHECK(col.builders[1].loyal_share == 0.1);
    const auto tg = build_scenario(ScenarioKind::timing_game);
    CHECK(tg.builders[0].timing_boost == 0.2);
    for (int K : {2, 3, 4, 10}) {
        ScenarioParams p;
        p.multi_builder_count = K;
        const auto mb = build_scenario(ScenarioKind::multi_builder, {}, p);
        CHECK(check(mb).empty());
        CHECK(mb.builders.size() == static_cast<std::size_t>(K));
        CHECK(mb.builders[0].initial_share == 0.2);
        CHECK(mb.rounds == 100000);
        CHECK(initial_state(mb).lambda(0) == doctest::Approx(0.2));
    }
    CHECK(parse_scenario_kind("timing_game") == ScenarioKind::timing_game);
    CHECK_THROWS(parse_scenario_kind("nope"));
}

TEST_CASE("format_double is shortest round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(0.0002)) == 0.0002);
    CHECK(std::stod(format_double(1.0 / 3)) == 1.0 / 3);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

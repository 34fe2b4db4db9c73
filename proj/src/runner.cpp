#include "pbsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "pbsim/auction.hpp"
#include "pbsim/config_io.hpp"
#include "pbsim/flow_dynamics.hpp"
#include "pbsim/rng.hpp"

namespace pbsim {

namespace {

constexpr double kPoleTol = 1e-12;

std::vector<double> ceilings(std::span<const double> loyal) {
    double total = 0.0;
    for (double l : loyal) total += l;
    std::vector<double> c(loyal.size());
    for (std::size_t k = 0; k < loyal.size(); ++k) c[k] = 1.0 - (total - loyal[k]);
    return c;
}

std::optional<Absorption> check_absorbed(const std::vector<double>& shares, const std::vector<double>& ceiling,
                                         long long round) {
    for (std::size_t k = 0; k < shares.size(); ++k) {
        if (shares[k] >= ceiling[k] - kPoleTol) {
            Absorption a;
            a.round = round;
            a.builder = k;
            a.share = ceiling[k];
            a.at_ceiling = ceiling[k] < 1.0;
            return a;
        }
    }
    return std::nullopt;
}

// Share leader; ties keep the previous leader, else the lowest index.
BuilderIndex leader(const std::vector<double>& shares, BuilderIndex previous) {
    const double top = *std::max_element(shares.begin(), shares.end());
    if (previous < shares.size() && shares[previous] == top) return previous;
    return static_cast<BuilderIndex>(std::find(shares.begin(), shares.end(), top) - shares.begin());
}

}  // namespace

std::vector<long long> recorded_rounds(long long rounds) {
    const long long stride = rounds <= 10000 ? 1 : 10;
    std::vector<long long> out;
    for (long long t = 0; t <= rounds; t += stride) out.push_back(t);
    if (out.back() != rounds) out.push_back(rounds);
    return out;
}

std::optional<Absorption> absorption_round(const std::vector<RoundRecord>& records, std::span<const double> loyal) {
    const auto ceiling = ceilings(loyal);
    for (const auto& r : records)
        if (auto a = check_absorbed(r.shares, ceiling, r.round)) return a;
    return std::nullopt;
}

Trajectory run_repetition(const ScenarioConfig& config, std::uint64_t repetition_seed, long long repetition,
                          RecordMode mode) {
    const std::size_t K = config.builders.size();
    Rng rng(repetition_seed);
    std::vector<double> loyal(K), boosts(K), fixed_ratio(K);
    for (std::size_t k = 0; k < K; ++k) {
        loyal[k] = config.builders[k].loyal_share;
        boosts[k] = config.builders[k].timing_boost;
        fixed_ratio[k] = config.builders[k].bid_ratio;
    }
    const auto ceiling = ceilings(loyal);
    const double reserve = config.flow_model.reserve;

    Trajectory tr;
    tr.repetition = repetition;
    tr.recorded_rounds = recorded_rounds(config.rounds);
    tr.designated_lambda.reserve(tr.recorded_rounds.size());
    MarketState state = initial_state(config);
    tr.max_shares = state.shares;
    std::size_t next_rec = 0;

    auto record = [&](const RoundOutcome* round, const std::vector<double>* bids) {
        tr.designated_lambda.push_back(state.lambda(0));
        if (mode == RecordMode::full) {
            RoundRecord r;
            r.round = state.round;
            r.shares = state.shares;
            r.lambdas = state.lambdas();
            if (round) {
                r.winner = round->winner;
                r.valuations = round->valuations;
                r.bids = *bids;
                r.boost_fired = round->boost_fired;
            }
            tr.records.push_back(std::move(r));
        }
        ++next_rec;
    };
    auto note_shares = [&]() {
        for (std::size_t k = 0; k < K; ++k) {
            tr.max_shares[k] = std::max(tr.max_shares[k], state.shares[k]);
            if (state.shares[k] == 1.0) tr.full_monopoly = true;
        }
        if (!tr.absorption) tr.absorption = check_absorbed(state.shares, ceiling, state.round);
    };

    note_shares();
    record(nullptr, nullptr);

    BuilderIndex lead = leader(state.shares, K);
    std::vector<double> bids(K);
    for (long long t = 1; t <= config.rounds; ++t) {
        // Monopoly with every rival exited and no reserve: the monopolist wins
        // every remaining round and nothing else changes.
        if (mode == RecordMode::summary && reserve == 0.0) {
            const auto mono = std::find(state.shares.begin(), state.shares.end(), 1.0);
            if (mono != state.shares.end()) {
                const auto k = static_cast<std::size_t>(mono - state.shares.begin());
                const long long base_round = state.round;
                const long long base_wins = state.win_counts[k];
                const long long base_elapsed = state.rounds_elapsed;
                while (next_rec < tr.recorded_rounds.size()) {
                    const long long r = tr.recorded_rounds[next_rec];
                    state.round = r;
                    state.rounds_elapsed = base_elapsed + (r - base_round);
                    state.win_counts[k] = base_wins + (r - base_round);
                    tr.designated_lambda.push_back(state.lambda(0));
                    ++next_rec;
                }
                state.round = config.rounds;
                state.rounds_elapsed = base_elapsed + (config.rounds - base_round);
                state.win_counts[k] = base_wins + (config.rounds - base_round);
                break;
            }
        }

        if (config.ratio_binding == RatioBinding::share_rank) lead = leader(state.shares, lead);
        auto round = sample_valuations(state.shares, config.flow_model, rng);
        for (std::size_t k = 0; k < K; ++k) {
            const double ratio = config.ratio_binding == RatioBinding::fixed
                                     ? fixed_ratio[k]
                                     : (k == lead ? config.strong_ratio : config.weak_ratio);
            const bool exited = state.shares[k] == 0.0 && loyal[k] == 0.0;
            bids[k] = exited ? -std::numeric_limits<double>::infinity() : ratio * round.valuations[k];
        }
        const auto draw = select_winner(bids, reserve, boosts, rng);
        round.round = t;
        round.winner = draw.winner;
        round.boost_fired = draw.boost_fired;

        state.round = t;
        ++state.rounds_elapsed;
        if (draw.winner) {
            ++state.win_counts[*draw.winner];
            const long long keep_round = state.round;
            const long long keep_elapsed = state.rounds_elapsed;
            auto counts = std::move(state.win_counts);
            state = step_shares(state, *draw.winner, config.flow_model, loyal, rng);
            state.win_counts = std::move(counts);
            state.round = keep_round;
            state.rounds_elapsed = keep_elapsed;
        }
        note_shares();
        if (next_rec < tr.recorded_rounds.size() && tr.recorded_rounds[next_rec] == t) record(&round, &bids);
    }
    tr.final_state = state;
    return tr;
}

EnsembleResult run_ensemble(const ScenarioConfig& config, const EnsembleOptions& options) {
    validate(config);
    const auto R = static_cast<std::size_t>(config.repetitions);
    const std::size_t K = config.builders.size();
    const auto keep = static_cast<std::size_t>(std::clamp<long long>(options.keep_trajectories, 0, config.repetitions));

    std::vector<Trajectory> runs(R);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t r = next++; r < R; r = next++) {
            runs[r] = run_repetition(config, stream_seed(config.seed, r), static_cast<long long>(r),
                                     r < keep ? RecordMode::full : RecordMode::summary);
        }
    };
    unsigned workers = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, R));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    EnsembleResult res;
    res.config_digest = config_digest(config);
    res.kind = config.kind;
    res.repetitions = config.repetitions;
    res.rounds = config.rounds;
    res.rounds_axis = recorded_rounds(config.rounds);
    const std::size_t T = res.rounds_axis.size();

    res.mean_lambda.assign(T, 0.0);
    res.se_lambda.assign(T, 0.0);
    std::vector<double> column(R);
    res.band_low.resize(T);
    res.band_high.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            column[r] = runs[r].designated_lambda[t];
            sum += column[r];
        }
        const double mean = sum / static_cast<double>(R);
        double ss = 0.0;
        for (double x : column) ss += (x - mean) * (x - mean);
        res.mean_lambda[t] = mean;
        res.se_lambda[t] = R > 1 ? std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
        std::sort(column.begin(), column.end());
        res.band_low[t] = nearest_rank(column, 5.0);
        res.band_high[t] = nearest_rank(column, 95.0);
    }

    std::vector<double> final_lambda0(R);
    std::vector<long long> absorbed_rounds;
    res.final_mean_lambda.assign(K, 0.0);
    res.max_shares.assign(K, 0.0);
    res.per_repetition.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
        const auto& tr = runs[r];
        auto& s = res.per_repetition[r];
        s.absorption = tr.absorption;
        s.final_shares = tr.final_state.shares;
        s.final_lambdas = tr.final_state.lambdas();
        s.max_shares = tr.max_shares;
        s.full_monopoly = tr.full_monopoly;
        final_lambda0[r] = s.final_lambdas[0];
        for (std::size_t k = 0; k < K; ++k) {
            res.final_mean_lambda[k] += s.final_lambdas[k] / static_cast<double>(R);
            res.max_shares[k] = std::max(res.max_shares[k], tr.max_shares[k]);
        }
        if (tr.full_monopoly) ++res.full_monopolies;
        if (tr.absorption) {
            absorbed_rounds.push_back(tr.absorption->round);
            if (tr.absorption->at_ceiling) ++res.absorption.at_ceiling;
        }
    }
    res.absorption.count = static_cast<long long>(absorbed_rounds.size());
    if (!absorbed_rounds.empty()) {
        std::sort(absorbed_rounds.begin(), absorbed_rounds.end());
        const std::size_t n = absorbed_rounds.size();
        res.absorption.min = absorbed_rounds.front();
        res.absorption.max = absorbed_rounds.back();
        res.absorption.median = n % 2 ? static_cast<double>(absorbed_rounds[n / 2])
                                      : 0.5 * static_cast<double>(absorbed_rounds[n / 2 - 1] + absorbed_rounds[n / 2]);
    }
    res.fairness = robust_fairness(final_lambda0, config.fairness);
    for (std::size_t r = 0; r < keep; ++r) res.trajectories.push_back(std::move(runs[r]));
    return res;
}

ScenarioConfig build_scenario(ScenarioKind kind, const std::vector<std::string>& overrides,
                              const ScenarioParams& params) {
    ScenarioConfig c;
    c.kind = kind;
    c.rounds = 6000;
    c.repetitions = 1000;
    c.seed = 42;
    c.warmup_rounds = 500;
    c.warmup_wins = {300, 200};
    c.fairness = FairnessSpec{0.1, 0.1, 0.6};
    c.builders = {BuilderProfile{0, 0.6, 0.7, 0.0, 0.0}, BuilderProfile{1, 0.4, 0.9, 0.0, 0.0}};

    switch (kind) {
        case ScenarioKind::baseline:
            break;
        case ScenarioKind::collaboration:
            c.builders[1].loyal_share = params.loyal_share;
            break;
        case ScenarioKind::timing_game:
            c.builders[0].timing_boost = params.timing_boost;
            break;
        case ScenarioKind::multi_builder: {
            const int K = params.multi_builder_count;
            if (K < 2) throw std::invalid_argument("multi_builder needs at least two builders");
            c.rounds = 100000;
            c.fairness.lambda0 = 0.2;
            c.builders.clear();
            c.warmup_wins.assign(static_cast<std::size_t>(K), 0);
            c.warmup_wins[0] = 100;
            const long long rest = c.warmup_rounds - 100;
            for (int k = 1; k < K; ++k) {
                // 400 warmup wins split as evenly as integers allow, extras to the lowest indices
                c.warmup_wins[static_cast<std::size_t>(k)] = rest / (K - 1) + ((k - 1) < rest % (K - 1) ? 1 : 0);
            }
            for (int k = 0; k < K; ++k) {
                BuilderProfile b;
                b.id = static_cast<BuilderIndex>(k);
                b.initial_share = k == 0 ? 0.2 : 0.8 / (K - 1);
                b.bid_ratio = k == 0 ? 0.7 : 0.9;
                c.builders.push_back(b);
            }
            break;
        }
    }
    for (const auto& o : overrides) c = apply_override(c, o);
    return c;
}

void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories, std::size_t builders) {
    out << "rep,round";
    for (const char* col : {"z_", "lambda_"})
        for (std::size_t k = 0; k < builders; ++k) out << ',' << col << k;
    out << ",winner";
    for (const char* col : {"v_", "b_"})
        for (std::size_t k = 0; k < builders; ++k) out << ',' << col << k;
    out << ",boost_fired\n";
    for (const auto& tr : trajectories) {
        for (const auto& r : tr.records) {
            out << tr.repetition << ',' << r.round;
            for (double z : r.shares) out << ',' << format_double(z);
            for (double l : r.lambdas) out << ',' << format_double(l);
            out << ',';
            if (r.winner) out << *r.winner;
            for (std::size_t k = 0; k < builders; ++k) {
                out << ',';
                if (k < r.valuations.size()) out << format_double(r.valuations[k]);
            }
            for (std::size_t k = 0; k < builders; ++k) {
                out << ',';
                if (k < r.bids.size() && std::isfinite(r.bids[k])) out << format_double(r.bids[k]);
            }
            out << ',' << (r.boost_fired ? 1 : 0) << '\n';
        }
    }
}

std::string ensemble_json(const EnsembleResult& res) {
    using nlohmann::json;
    json j;
    j["config_digest"] = res.config_digest;
    j["scenario"] = to_string(res.kind);
    j["repetitions"] = res.repetitions;
    j["rounds"] = res.rounds;
    j["bands"] = {{"round", res.rounds_axis},
                  {"mean_lambda", res.mean_lambda},
                  {"se_lambda", res.se_lambda},
                  {"band_low", res.band_low},
                  {"band_high", res.band_high},
                  {"percentiles", {5, 95}}};
    json ab = {{"count", res.absorption.count}, {"at_ceiling", res.absorption.at_ceiling}};
    ab["median_round"] = res.absorption.median ? json(*res.absorption.median) : json(nullptr);
    ab["min_round"] = res.absorption.min ? json(*res.absorption.min) : json(nullptr);
    ab["max_round"] = res.absorption.max ? json(*res.absorption.max) : json(nullptr);
    json rounds = json::array();
    for (const auto& s : res.per_repetition) rounds.push_back(s.absorption ? json(s.absorption->round) : json(nullptr));
    ab["per_repetition"] = rounds;
    j["absorption"] = ab;
    j["fairness"] = {{"empirical_prob", res.fairness.empirical_prob},
                     {"satisfied", res.fairness.satisfied},
                     {"fair_low", res.fairness.fair_low},
                     {"fair_high", res.fairness.fair_high},
                     {"sample_count", res.fairness.sample_count}};
    j["final_mean_lambda"] = res.final_mean_lambda;
    j["max_shares"] = res.max_shares;
    j["full_monopolies"] = res.full_monopolies;
    return j.dump(2) + "\n";
}

}  // namespace pbsim

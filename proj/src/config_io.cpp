#include "pbsim/config_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace pbsim {

std::string format_double(double x) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (ec != std::errc()) return std::to_string(x);
    return std::string(buf.data(), ptr);
}

namespace {

std::string trim(const std::string& s) {
    const auto ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

std::string join_ints(const std::vector<long long>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

class FlatReader {
public:
    explicit FlatReader(const FlatConfig& flat) : flat_(flat) {}

    void read(const std::string& key, double& out) {
        auto it = take(key);
        if (!it) return;
        double v{};
        const auto& s = *it;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            errors_.push_back({key, "not a number: '" + s + "'"});
        else
            out = v;
    }

    template <typename Int>
    void read_int(const std::string& key, Int& out) {
        auto it = take(key);
        if (!it) return;
        Int v{};
        const auto& s = *it;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            errors_.push_back({key, "not an integer: '" + s + "'"});
        else
            out = v;
    }

    void read_ints(const std::string& key, std::vector<long long>& out) {
        auto it = take(key);
        if (!it) return;
        std::vector<long long> v;
        std::stringstream ss(*it);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            long long x{};
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
            if (part.empty() || ec != std::errc() || p != part.data() + part.size()) {
                errors_.push_back({key, "not an integer list: '" + *it + "'"});
                return;
            }
            v.push_back(x);
        }
        out = std::move(v);
    }

    template <typename Fn>
    void read_enum(const std::string& key, Fn&& parse) {
        auto it = take(key);
        if (!it) return;
        try {
            parse(*it);
        } catch (const std::exception& e) {
            errors_.push_back({key, e.what()});
        }
    }

    std::vector<Violation> finish() {
        for (const auto& [k, v] : flat_)
            if (!used_.contains(k)) errors_.push_back({k, "unknown key"});
        return std::move(errors_);
    }

private:
    std::optional<std::string> take(const std::string& key) {
        auto it = flat_.find(key);
        if (it == flat_.end()) return std::nullopt;
        used_[key] = true;
        return it->second;
    }

    const FlatConfig& flat_;
    std::map<std::string, bool> used_;
    std::vector<Violation> errors_;
};

}  // namespace

FlatConfig to_flat(const ScenarioConfig& c) {
    FlatConfig f;
    f["kind"] = to_string(c.kind);
    f["rounds"] = std::to_string(c.rounds);
    f["repetitions"] = std::to_string(c.repetitions);
    f["seed"] = std::to_string(c.seed);
    f["warmup_rounds"] = std::to_string(c.warmup_rounds);
    f["warmup_wins"] = join_ints(c.warmup_wins);
    f["initial_mass"] = format_double(c.initial_mass);
    f["ratio_binding"] = to_string(c.ratio_binding);
    f["strong_ratio"] = format_double(c.strong_ratio);
    f["weak_ratio"] = format_double(c.weak_ratio);
    f["flow_model.poisson_rate"] = format_double(c.flow_model.poisson_rate);
    f["flow_model.lognormal_mu"] = format_double(c.flow_model.lognormal_mu);
    f["flow_model.lognormal_sigma"] = format_double(c.flow_model.lognormal_sigma);
    f["flow_model.delta"] = format_double(c.flow_model.delta);
    f["flow_model.drop_prob"] = format_double(c.flow_model.drop_prob);
    f["flow_model.reserve"] = format_double(c.flow_model.reserve);
    f["fairness.epsilon"] = format_double(c.fairness.epsilon);
    f["fairness.delta"] = format_double(c.fairness.delta);
    f["fairness.lambda0"] = format_double(c.fairness.lambda0);
    for (std::size_t k = 0; k < c.builders.size(); ++k) {
        const auto& b = c.builders[k];
        const std::string p = "builders." + std::to_string(k) + ".";
        f[p + "initial_share"] = format_double(b.initial_share);
        f[p + "bid_ratio"] = format_double(b.bid_ratio);
        f[p + "loyal_share"] = format_double(b.loyal_share);
        f[p + "timing_boost"] = format_double(b.timing_boost);
    }
    return f;
}

ScenarioConfig from_flat(const FlatConfig& flat) {
    ScenarioConfig c;
    FlatReader r(flat);
    r.read_enum("kind", [&](const std::string& s) { c.kind = parse_scenario_kind(s); });
    r.read_int("rounds", c.rounds);
    r.read_int("repetitions", c.repetitions);
    r.read_int("seed", c.seed);
    r.read_int("warmup_rounds", c.warmup_rounds);
    r.read_ints("warmup_wins", c.warmup_wins);
    r.read("initial_mass", c.initial_mass);
    r.read_enum("ratio_binding", [&](const std::string& s) { c.ratio_binding = parse_ratio_binding(s); });
    r.read("strong_ratio", c.strong_ratio);
    r.read("weak_ratio", c.weak_ratio);
    r.read("flow_model.poisson_rate", c.flow_model.poisson_rate);
    r.read("flow_model.lognormal_mu", c.flow_model.lognormal_mu);
    r.read("flow_model.lognormal_sigma", c.flow_model.lognormal_sigma);
    r.read("flow_model.delta", c.flow_model.delta);
    r.read("flow_model.drop_prob", c.flow_model.drop_prob);
    r.read("flow_model.reserve", c.flow_model.reserve);
    r.read("fairness.epsilon", c.fairness.epsilon);
    r.read("fairness.delta", c.fairness.delta);
    r.read("fairness.lambda0", c.fairness.lambda0);

    // builders.<k>.<field>; the builder count is one past the largest index present
    std::size_t count = 0;
    for (const auto& [key, value] : flat) {
        if (key.rfind("builders.", 0) != 0) continue;
        const auto rest = key.substr(9);
        const auto dot = rest.find('.');
        std::size_t idx{};
        auto [p, ec] = std::from_chars(rest.data(), rest.data() + (dot == std::string::npos ? rest.size() : dot), idx);
        if (ec == std::errc() && dot != std::string::npos && p == rest.data() + dot && idx < 1024)
            count = std::max(count, idx + 1);
    }
    c.builders.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        auto& b = c.builders[k];
        b.id = k;
        const std::string p = "builders." + std::to_string(k) + ".";
        r.read(p + "initial_share", b.initial_share);
        r.read(p + "bid_ratio", b.bid_ratio);
        r.read(p + "loyal_share", b.loyal_share);
        r.read(p + "timing_boost", b.timing_boost);
    }
    auto errors = r.finish();
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

std::string serialize(const ScenarioConfig& config) {
    std::string out;
    for (const auto& [k, v] : to_flat(config)) out += k + " = " + v + "\n";
    return out;
}

ScenarioConfig parse_config(const std::string& text) {
    FlatConfig flat;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::vector<Violation> errors;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back({"line " + std::to_string(lineno), "expected 'key = value'"});
            continue;
        }
        auto key = trim(line.substr(0, eq));
        if (flat.contains(key)) errors.push_back({key, "duplicate key"});
        flat[key] = trim(line.substr(eq + 1));
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return from_flat(flat);
}

ScenarioConfig apply_override(const ScenarioConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError({{assignment, "override must have the form key=value"}});
    const auto key = trim(assignment.substr(0, eq));
    auto flat = to_flat(config);
    const bool builder_key = key.rfind("builders.", 0) == 0;
    if (!flat.contains(key) && !builder_key) throw ConfigError({{key, "unknown key"}});
    flat[key] = trim(assignment.substr(eq + 1));
    return from_flat(flat);
}

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::string config_digest(const ScenarioConfig& config) {
    return sha256_hex(serialize(config));
}

}  // namespace pbsim

#include "pbsim/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace pbsim {

double FairnessSpec::fair_low() const {
    return std::clamp((1.0 - epsilon) * lambda0, 0.0, 1.0);
}

double FairnessSpec::fair_high() const {
    return std::clamp((1.0 + epsilon) * lambda0, 0.0, 1.0);
}

FairnessReport robust_fairness(std::span<const double> samples, const FairnessSpec& spec) {
    if (samples.empty()) throw std::invalid_argument("robust_fairness: empty sample list");
    FairnessReport rep;
    rep.fair_low = spec.fair_low();
    rep.fair_high = spec.fair_high();
    rep.sample_count = samples.size();
    std::size_t inside = 0;
    for (double x : samples) {
        if (!(x >= 0.0 && x <= 1.0))
            throw std::invalid_argument("robust_fairness: sample outside [0,1]");
        if (x >= rep.fair_low && x <= rep.fair_high) ++inside;
    }
    rep.empirical_prob = static_cast<double>(inside) / static_cast<double>(samples.size());
    rep.satisfied = rep.empirical_prob >= 1.0 - spec.delta;
    return rep;
}

double nearest_rank(std::span<const double> sorted, double percent) {
    if (sorted.empty()) throw std::invalid_argument("nearest_rank: empty range");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

PercentileBands percentile_bands(const std::vector<std::vector<double>>& trajectories,
                                 double low_percent, double high_percent) {
    if (trajectories.empty()) throw std::invalid_argument("percentile_bands: no trajectories");
    if (low_percent > high_percent)
        throw std::invalid_argument("percentile_bands: low percentile above high");
    const std::size_t rounds = trajectories.front().size();
    for (const auto& t : trajectories)
        if (t.size() != rounds) throw std::invalid_argument("percentile_bands: ragged input");

    PercentileBands bands;
    bands.low.resize(rounds);
    bands.median.resize(rounds);
    bands.high.resize(rounds);
    std::vector<double> column(trajectories.size());
    for (std::size_t t = 0; t < rounds; ++t) {
        for (std::size_t r = 0; r < trajectories.size(); ++r) column[r] = trajectories[r][t];
        std::sort(column.begin(), column.end());
        bands.low[t] = nearest_rank(column, low_percent);
        bands.median[t] = nearest_rank(column, 50.0);
        bands.high[t] = nearest_rank(column, high_percent);
    }
    return bands;
}

double hhi(std::span<const double> shares, ShareCoverage coverage) {
    if (shares.empty()) throw std::invalid_argument("hhi: empty share vector");
    double sum = 0.0, sq = 0.0;
    for (double s : shares) {
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("hhi: share outside [0,1]");
        sum += s;
        sq += s * s;
    }
    if (coverage == ShareCoverage::complete && std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("hhi: shares sum to " + std::to_string(sum) + ", expected 1");
    if (coverage == ShareCoverage::partial && sum > 1.0 + 1e-6)
        throw std::invalid_argument("hhi: partial shares sum above 1");
    return sq;
}

double profit_margin(double block_value, double payment, const std::string& method) {
    if (!(block_value > 0.0)) throw std::invalid_argument("profit_margin: block_value must be positive");
    if (payment < 0.0) throw std::invalid_argument("profit_margin: payment must be nonnegative");
    if (method == "value_relative") return (block_value - payment) / block_value;
    if (method == "payment_relative") {
        if (payment == 0.0) throw std::invalid_argument("profit_margin: payment_relative needs payment > 0");
        return (block_value - payment) / payment;
    }
    throw std::invalid_argument("profit_margin: unknown method '" + method + "'");
}

namespace {

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

double parse_number(const std::string& s, const std::string& column, std::size_t line) {
    std::string cleaned;
    for (char c : s)
        if (c != '_' && c != ' ') cleaned += c;
    // thousands separators are only legal in the blocks column, which is quoted in the source tables
    if (column == "blocks") std::erase(cleaned, ',');
    try {
        std::size_t used = 0;
        double v = std::stod(cleaned, &used);
        if (used != cleaned.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line) + ": column " + column +
                                 ": not a number: '" + s + "'");
    }
}

}  // namespace

std::vector<BuilderStats> parse_builder_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> col;
    std::vector<BuilderStats> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (col.empty()) {
            for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
            for (const char* need : {"builder", "blocks", "market_share", "total_payments",
                                     "total_block_value"})
                if (!col.contains(need))
                    throw std::runtime_error(std::string("missing column: ") + need);
            continue;
        }
        if (fields.size() != col.size())
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(col.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        BuilderStats r;
        r.builder = fields[col["builder"]];
        r.blocks = static_cast<long long>(parse_number(fields[col["blocks"]], "blocks", lineno));
        r.market_share = parse_number(fields[col["market_share"]], "market_share", lineno) / 100.0;
        r.total_payments = parse_number(fields[col["total_payments"]], "total_payments", lineno);
        r.total_block_value =
            parse_number(fields[col["total_block_value"]], "total_block_value", lineno);
        if (auto it = col.find("profit_margin"); it != col.end() && !fields[it->second].empty()) {
            r.has_reported_margin = true;
            r.reported_margin = parse_number(fields[it->second], "profit_margin", lineno) / 100.0;
        }
        rows.push_back(std::move(r));
    }
    if (col.empty()) throw std::runtime_error("empty CSV: no header");
    if (rows.empty()) throw std::runtime_error("CSV has a header but no rows");
    return rows;
}

}  // namespace pbsim

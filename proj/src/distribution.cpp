#include "pbsim/distribution.hpp"

// pchip in Boost 1.74 calls isnan unqualified
#include <math.h>
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pbsim {

struct ValueDistribution::Spline {
    boost::math::interpolators::pchip<std::vector<double>> F;
};

ValueDistribution ValueDistribution::power(int exponent, double low, double high) {
    if (exponent < 1) throw std::invalid_argument("power distribution: exponent must be a positive integer");
    if (!(low < high)) throw std::invalid_argument("power distribution: empty support");
    ValueDistribution d;
    d.family_ = DistributionFamily::power_of_uniform;
    d.exponent_ = exponent;
    d.low_ = low;
    d.high_ = high;
    return d;
}

ValueDistribution ValueDistribution::tabulated(std::vector<double> grid, std::vector<double> cdf,
                                               std::vector<double> pdf) {
    const std::size_t n = grid.size();
    if (n < 4 || cdf.size() != n || pdf.size() != n)
        throw std::invalid_argument("tabulated distribution: need >= 4 nodes and equal-length columns");
    for (std::size_t k = 1; k < n; ++k)
        if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("tabulated distribution: grid not increasing");
    if (std::abs(cdf.front()) > 1e-12 || std::abs(cdf.back() - 1.0) > 1e-12)
        throw std::invalid_argument("tabulated distribution: CDF must run from 0 to 1");
    for (std::size_t k = 0; k < n; ++k) {
        if (pdf[k] < 0.0) throw std::invalid_argument("tabulated distribution: negative pdf at node " + std::to_string(k));
        if (k && cdf[k] < cdf[k - 1])
            throw std::invalid_argument("tabulated distribution: CDF decreases at node " + std::to_string(k));
    }
    for (std::size_t k = 1; k < n; ++k) {
        const double trap = 0.5 * (pdf[k] + pdf[k - 1]) * (grid[k] - grid[k - 1]);
        if (std::abs(trap - (cdf[k] - cdf[k - 1])) > 1e-6)
            throw std::invalid_argument("tabulated distribution: pdf inconsistent with CDF at node " + std::to_string(k));
    }
    ValueDistribution d;
    d.family_ = DistributionFamily::tabulated;
    d.exponent_ = 0;
    d.low_ = grid.front();
    d.high_ = grid.back();
    d.grid_ = grid;
    d.cdf_ = cdf;
    d.pdf_ = pdf;
    d.spline_ = std::make_shared<const Spline>(
        Spline{boost::math::interpolators::pchip<std::vector<double>>(std::move(grid), std::move(cdf))});
    return d;
}

double ValueDistribution::cdf(double v) const {
    if (v <= low_) return 0.0;
    if (v >= high_) return 1.0;
    if (family_ == DistributionFamily::power_of_uniform)
        return std::pow((v - low_) / (high_ - low_), exponent_);
    return std::clamp(spline_->F(v), 0.0, 1.0);
}

double ValueDistribution::pdf(double v) const {
    if (v < low_ || v > high_) return 0.0;
    if (family_ == DistributionFamily::power_of_uniform) {
        const double w = high_ - low_;
        return exponent_ / w * std::pow((v - low_) / w, exponent_ - 1);
    }
    return std::max(0.0, spline_->F.prime(v));
}

double ValueDistribution::cdf_over_pdf(double v) const {
    if (family_ == DistributionFamily::power_of_uniform) return std::max(0.0, v - low_) / exponent_;
    const double f = pdf(v);
    if (f <= 0.0) return cdf(v) > 0.0 ? 1e300 : 0.0;
    return cdf(v) / f;
}

double ValueDistribution::quantile(double u) const {
    if (u <= 0.0) return low_;
    if (u >= 1.0) return high_;
    if (family_ == DistributionFamily::power_of_uniform)
        return low_ + (high_ - low_) * std::pow(u, 1.0 / exponent_);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const auto k = static_cast<std::size_t>(it - cdf_.begin());
    double lo = grid_[k == 0 ? 0 : k - 1], hi = grid_[std::min(k, grid_.size() - 1)];
    for (int i = 0; i < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) >= u ? hi : lo) = mid;
    }
    return hi;
}

double ValueDistribution::local_exponent() const {
    if (family_ == DistributionFamily::power_of_uniform) return exponent_;
    // slope of log F against log(v - low) over the first two nodes with F > 0
    std::size_t k = 1;
    while (k + 1 < grid_.size() && cdf_[k] <= 0.0) ++k;
    if (k + 1 >= grid_.size() || cdf_[k + 1] <= 0.0) return 1.0;
    return std::log(cdf_[k + 1] / cdf_[k]) / std::log((grid_[k + 1] - low_) / (grid_[k] - low_));
}

ValueDistribution cartel(const ValueDistribution& base, int m) {
    if (m < 1) throw std::invalid_argument("cartel: size must be positive");
    if (base.family() == DistributionFamily::power_of_uniform)
        return ValueDistribution::power(base.exponent() * m, base.support_low(), base.support_high());
    auto grid = base.grid();
    std::vector<double> cdf(grid.size()), pdf(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double F = base.cdf_grid()[k];
        cdf[k] = std::pow(F, m);
        pdf[k] = m * std::pow(F, m - 1) * base.pdf_grid()[k];
    }
    return ValueDistribution::tabulated(std::move(grid), std::move(cdf), std::move(pdf));
}

bool dominates(const ValueDistribution& strong, const ValueDistribution& weak) {
    if (strong.family() == DistributionFamily::power_of_uniform &&
        weak.family() == DistributionFamily::power_of_uniform && strong.support_low() == weak.support_low() &&
        strong.support_high() == weak.support_high())
        return strong.exponent() >= weak.exponent();
    const double lo = std::min(strong.support_low(), weak.support_low());
    const double hi = std::max(strong.support_high(), weak.support_high());
    for (int k = 0; k <= 1000; ++k) {
        const double v = lo + (hi - lo) * k / 1000.0;
        if (strong.cdf(v) > weak.cdf(v) + 1e-12) return false;
    }
    return true;
}

}  // namespace pbsim

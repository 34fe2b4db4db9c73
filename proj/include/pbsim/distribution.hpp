#pragma once

#include <memory>
#include <vector>

namespace pbsim {

enum class DistributionFamily { power_of_uniform, tabulated };

/// Valuation distribution on [support_low, support_high].
///
/// power_of_uniform: F(v) = H(v)^m with H uniform on the support, i.e. the
/// maximum of m independent uniform draws.
/// tabulated: F and f from monotone cubic (PCHIP) interpolation of a CDF table.
class ValueDistribution {
public:
    static ValueDistribution power(int exponent, double low = 0.0, double high = 1.0);

    /// Throws std::invalid_argument unless the table is a valid distribution:
    /// CDF 0 at the first node and 1 at the last, nondecreasing, pdf >= 0, and
    /// the trapezoid integral of pdf matching each CDF increment within 1e-6.
    static ValueDistribution tabulated(std::vector<double> grid, std::vector<double> cdf,
                                       std::vector<double> pdf);

    DistributionFamily family() const { return family_; }
    int exponent() const { return exponent_; }
    double support_low() const { return low_; }
    double support_high() const { return high_; }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& cdf_grid() const { return cdf_; }
    const std::vector<double>& pdf_grid() const { return pdf_; }

    double cdf(double v) const;
    double pdf(double v) const;
    /// F(v) / f(v); the power family gives (v - low) / m, finite at the lower end.
    double cdf_over_pdf(double v) const;
    /// Smallest v with F(v) >= u.
    double quantile(double u) const;
    /// m such that F(v) ~ c (v - low)^m as v -> low.
    double local_exponent() const;

private:
    struct Spline;

    DistributionFamily family_ = DistributionFamily::power_of_uniform;
    int exponent_ = 1;
    double low_ = 0.0;
    double high_ = 1.0;
    std::vector<double> grid_, cdf_, pdf_;
    std::shared_ptr<const Spline> spline_;
};

/// Valuation of a cartel of m bidders drawing from `base`: CDF base^m.
ValueDistribution cartel(const ValueDistribution& base, int m);

/// True when `strong` first-order dominates `weak`; decided exactly for two
/// power-family members on the same support, by a CDF comparison on a grid otherwise.
bool dominates(const ValueDistribution& strong, const ValueDistribution& weak);

}  // namespace pbsim

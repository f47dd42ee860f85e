#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace collapse::stats {

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

/// Goodness of fit of observed integer counts against a discrete pmf. Bins
/// are merged from both tails until every expected count is >= min_expected.
ChiSquare chi_square_counts(const std::vector<std::uint64_t>& counts, const std::function<double(std::uint64_t)>& pmf,
                            double min_expected = 5.0);

/// Poisson pmf evaluated in log space.
double poisson_pmf(std::uint64_t k, double mean);

/// Chi-square test of two samples' histograms over shared bins (homogeneity).
ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b, int bins);

/// Binomial standard deviation of a frequency estimate.
double binomial_sigma(double p, std::size_t n);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x with the slope standard error.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);
double mean(const std::vector<double>& values);
double variance(const std::vector<double>& values);

}  // namespace collapse::stats

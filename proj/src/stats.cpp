#include "collapse/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "collapse/errors.hpp"

namespace collapse::stats {

namespace {

double chi_square_sf(double statistic, int dof)
{
    if (dof < 1) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace

double poisson_pmf(std::uint64_t k, double mean)
{
    if (mean <= 0.0) return k == 0 ? 1.0 : 0.0;
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(mean) - mean - std::lgamma(kd + 1.0));
}

ChiSquare chi_square_counts(const std::vector<std::uint64_t>& counts, const std::function<double(std::uint64_t)>& pmf,
                            double min_expected)
{
    if (counts.empty()) throw UsageError("chi-square test needs observations");
    const double n = static_cast<double>(counts.size());
    const std::uint64_t kmax = *std::max_element(counts.begin(), counts.end());

    // Observed and expected per value 0..kmax; the last bin absorbs the upper tail.
    std::vector<double> observed(kmax + 1, 0.0);
    std::vector<double> expected(kmax + 1, 0.0);
    for (auto c : counts) observed[c] += 1.0;
    double cumulative = 0.0;
    for (std::uint64_t k = 0; k <= kmax; ++k) {
        expected[k] = n * pmf(k);
        cumulative += expected[k];
    }
    expected[kmax] += std::max(0.0, n - cumulative);

    // Merge from the left until the running expectation reaches the floor, then from the right.
    std::vector<double> obs, exp;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::uint64_t k = 0; k <= kmax; ++k) {
        o_acc += observed[k];
        e_acc += expected[k];
        if (e_acc >= min_expected) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (exp.empty()) {
            obs.push_back(o_acc);
            exp.push_back(e_acc);
        } else {
            obs.back() += o_acc;
            exp.back() += e_acc;
        }
    }

    ChiSquare out;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - exp[i];
        out.statistic += d * d / exp[i];
    }
    out.dof = static_cast<int>(obs.size()) - 1;
    out.p_value = chi_square_sf(out.statistic, out.dof);
    return out;
}

ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b, int bins)
{
    if (a.empty() || b.empty() || bins < 2) throw UsageError("two-sample chi-square needs data and >= 2 bins");
    // Equal-count bin edges from the pooled sample.
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::sort(pooled.begin(), pooled.end());
    std::vector<double> edges;
    for (int i = 1; i < bins; ++i) edges.push_back(pooled[pooled.size() * static_cast<std::size_t>(i) / static_cast<std::size_t>(bins)]);
    auto histogram = [&](const std::vector<double>& s) {
        std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
        for (double v : s) h[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin())] += 1.0;
        return h;
    };
    const auto ha = histogram(a);
    const auto hb = histogram(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    ChiSquare out;
    int used = 0;
    for (std::size_t i = 0; i < ha.size(); ++i) {
        const double tot = ha[i] + hb[i];
        if (tot == 0.0) continue;
        const double ea = tot * na / (na + nb);
        const double eb = tot * nb / (na + nb);
        out.statistic += (ha[i] - ea) * (ha[i] - ea) / ea + (hb[i] - eb) * (hb[i] - eb) / eb;
        ++used;
    }
    out.dof = used - 1;
    out.p_value = chi_square_sf(out.statistic, out.dof);
    return out;
}

double binomial_sigma(double p, std::size_t n)
{
    if (n == 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 3) throw UsageError("linear fit needs >= 3 paired points");
    const double n = static_cast<double>(x.size());
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw UsageError("linear fit needs distinct x values");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.slope_se = std::sqrt(sse / (n - 2.0) / sxx);
    return fit;
}

double median(std::vector<double> values)
{
    if (values.empty()) throw UsageError("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

double mean(const std::vector<double>& values)
{
    if (values.empty()) throw UsageError("mean of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double variance(const std::vector<double>& values)
{
    if (values.size() < 2) throw UsageError("variance needs >= 2 values");
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

}  // namespace collapse::stats

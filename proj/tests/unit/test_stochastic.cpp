#include <doctest.h>

#include <cmath>
#include <numbers>

#include "collapse/errors.hpp"
#include "collapse/localization.hpp"
#include "collapse/stats.hpp"
#include "collapse/stochastic.hpp"

using namespace collapse;

TEST_CASE("Philox known answer: zero key, zero counter")
{
    // published Philox4x32-10 vector {0x6627e8d5, 0xe169c58d, ...}
    RngStream rng(0, 0);
    CHECK(rng() == 0xe169c58d6627e8d5ull);
}

TEST_CASE("streams are reproducible and independent")
{
    RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
    for (int i = 0; i < 10; ++i) {
        const auto x = a();
        CHECK(x == b());
        CHECK(x != c());
        CHECK(x != d());
    }
    RngStream e(7, 3);
    CHECK(e.derive(1)() != e.derive(2)());
    CHECK(e.derive(1)() == RngStream(7, 3).derive(1)());
}

TEST_CASE("uniform moments")
{
    RngStream rng(1, 1);
    std::vector<double> v;
    for (int i = 0; i < 200000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        v.push_back(u);
    }
    CHECK(stats::mean(v) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(stats::variance(v) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("poisson counts fit the pmf")
{
    RngStream rng(2, 0);
    std::vector<std::uint64_t> counts;
    for (int i = 0; i < 20000; ++i) counts.push_back(rng.poisson(3.5));
    const auto chi = stats::chi_square_counts(counts, [](std::uint64_t k) { return stats::poisson_pmf(k, 3.5); });
    CHECK(chi.p_value > 0.001);
    CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("poisson_times: count and horizon")
{
    RngStream rng(3, 0);
    double total = 0;
    for (int rep = 0; rep < 2000; ++rep) {
        const auto t = poisson_times(2.0, 5.0, rng);
        for (std::size_t i = 0; i < t.size(); ++i) {
            REQUIRE(t[i] > 0.0);
            REQUIRE(t[i] < 5.0);
            if (i) REQUIRE(t[i] > t[i - 1]);
        }
        total += static_cast<double>(t.size());
    }
    CHECK(total / 2000 == doctest::Approx(10.0).epsilon(0.03));
    CHECK(poisson_times(0.0, 5.0, rng).empty());
}

TEST_CASE("sprinkle: points inside, sorted, density")
{
    RngStream rng(4, 0);
    const Region reg{0, 2, -1, 3};
    const auto s = sprinkle(reg, 10.0, rng);
    CHECK(s.points.size() > 40);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        CHECK(s.points[i].t >= 0);
        CHECK(s.points[i].x < 3);
        if (i) CHECK(s.points[i - 1].t <= s.points[i].t);
    }
    CHECK_THROWS_AS(sprinkle(reg, -1.0, rng), ConfigError);
}

TEST_CASE("Z density integrates to one and matches the mixture")
{
    SpectralWeights w{{{0.0, 0.3}, {2.0, 0.7}}};
    const double r = 0.8;
    const double integral = integrate_trapezoid([&](double z) { return z_density(w, z, r); }, -15, 17, 4001);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-10));
    // independent closed form
    const double c = 1.0 / std::sqrt(std::numbers::pi * r * r);
    const double z = 1.3;
    CHECK(z_density(w, z, r) == doctest::Approx(c * (0.3 * std::exp(-z * z / (r * r)) + 0.7 * std::exp(-(2 - z) * (2 - z) / (r * r)))));
}

TEST_CASE("sample_Z: component variance r^2/2")
{
    SpectralWeights w{{{1.0, 1.0}}};
    RngStream rng(5, 0);
    std::vector<double> z;
    for (int i = 0; i < 100000; ++i) z.push_back(sample_Z(w, 2.0, rng));
    CHECK(stats::mean(z) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(stats::variance(z) == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("sample_index follows weights; degenerate input throws")
{
    RngStream rng(6, 0);
    int hits = 0;
    for (int i = 0; i < 100000; ++i) hits += sample_index({1.0, 3.0}, rng) == 1;
    CHECK(hits / 1e5 == doctest::Approx(0.75).epsilon(0.01));
    CHECK_THROWS_AS(sample_index({0.0, 0.0}, rng), DegenerateStateError);
}

TEST_CASE("localization prefactor normalizes L^2")
{
    const double r = 1.7;
    const double c = localization_prefactor(r);
    const double integral = integrate_trapezoid([&](double z) { return c * c * std::exp(-z * z / (r * r)); }, -20, 20, 4001);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stats helpers")
{
    CHECK(stats::binomial_sigma(0.7, 10000) == doctest::Approx(std::sqrt(0.21 / 1e4)));
    CHECK(stats::median({3, 1, 2}) == 2.0);
    CHECK(stats::median({4, 1, 2, 3}) == 2.5);
    const auto fit = stats::fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
    CHECK(fit.slope_se == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(stats::poisson_pmf(2, 3.0) == doctest::Approx(4.5 * std::exp(-3.0)));
}

TEST_CASE("counts in disjoint subregions are uncorrelated")
{
    std::vector<double> left, right;
    for (std::uint64_t d = 0; d < 4000; ++d) {
        RngStream rng(12, d);
        const auto s = sprinkle({0, 1, 0, 2}, 4.0, rng);
        double l = 0, r = 0;
        for (const auto& p : s.points) (p.x < 1 ? l : r) += 1;
        left.push_back(l);
        right.push_back(r);
    }
    const double ml = stats::mean(left), mr = stats::mean(right);
    double cov = 0;
    for (std::size_t i = 0; i < left.size(); ++i) cov += (left[i] - ml) * (right[i] - mr);
    cov /= static_cast<double>(left.size() - 1);
    const double corr = cov / std::sqrt(stats::variance(left) * stats::variance(right));
    CHECK(std::abs(corr) < 4.0 / std::sqrt(4000.0));
}

TEST_CASE("localization factors are positive")
{
    const auto s = make_space({Factor::grid(3)});
    StateVector psi(s, Eigen::VectorXcd::Ones(3));
    const std::vector<double> values{0.0, 5.0, 12.0};
    apply_diagonal_localization(psi, values, 0.0, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(psi[i].real() > 0.0);
}

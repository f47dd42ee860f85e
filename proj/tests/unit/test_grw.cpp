#include <doctest.h>

#include <cmath>
#include <numbers>

#include "collapse/errors.hpp"
#include "collapse/grw.hpp"
#include "collapse/localization.hpp"

using namespace collapse;
using namespace collapse::grw;

namespace {

GrwConfig small()
{
    GrwConfig c;
    c.n_sites = 101;
    c.dx = 0.2;
    c.r = 1.0;
    c.lambda = 1.0;
    c.T = 5.0;
    return c;
}

}  // namespace

TEST_CASE("grid is centred")
{
    const auto c = small();
    CHECK(c.position(50) == doctest::Approx(0.0));
    CHECK(c.position(0) == doctest::Approx(-10.0));
}

TEST_CASE("localization matches the Gaussian profile")
{
    const auto c = small();
    auto psi = gaussian_packet(c, 0.0, 2.0);
    const auto before = psi;
    apply_localization(psi, c, 0, 1.0, c.r);
    const double pref = localization_prefactor(c.r);
    for (std::size_t j : {10u, 50u, 70u}) {
        const double x = c.position(j);
        CHECK(std::abs(psi[j] - before[j] * pref * std::exp(-(x - 1.0) * (x - 1.0) / 2.0)) < 1e-14);
    }
}

TEST_CASE("center density integrates to the norm")
{
    const auto c = small();
    const auto psi = two_packet_state(c, -3, 3, 0.5, 0.7);
    const double integral = integrate_trapezoid([&](double z) { return center_density(psi, c, 0, z, c.r); }, -25, 25, 5001);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("two-packet weights")
{
    const auto c = small();
    const auto psi = two_packet_state(c, -3, 3, 0.5, 0.7);
    const auto p = position_marginal(psi, 0);
    double right = 0;
    for (std::size_t j = 0; j < p.size(); ++j) right += c.position(j) > 0 ? p[j] : 0.0;
    CHECK(right == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("Schrodinger step is unitary and spreads a free packet")
{
    auto c = small();
    c.hamiltonian = HamiltonianKind::free;
    SchrodingerStepper step(c);
    auto psi = gaussian_packet(c, 0.0, 0.5);
    auto width = [&](const StateVector& s) {
        const auto p = position_marginal(s, 0);
        double m2 = 0;
        for (std::size_t j = 0; j < p.size(); ++j) m2 += p[j] * c.position(j) * c.position(j);
        return m2;
    };
    const double w0 = width(psi);
    for (int i = 0; i < 50; ++i) step.step(psi, 0.01);
    CHECK(norm2(psi) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(width(psi) > w0);
}

TEST_CASE("run_grw: hit count near lambda T, reproducible")
{
    const auto c = small();
    const auto init = two_packet_state(c, -3, 3, 0.5, 0.5);
    double total = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        RngStream rng(11, s);
        total += static_cast<double>(run_grw(c, init, rng).hits.size());
    }
    CHECK(total / 200 == doctest::Approx(5.0).epsilon(0.1));
    RngStream a(1, 1), b(1, 1);
    const auto ta = run_grw(c, init, a), tb = run_grw(c, init, b);
    CHECK(ta.final_state.amplitudes() == tb.final_state.amplitudes());
}

TEST_CASE("invalid GRW configs")
{
    auto c = small();
    c.r = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small();
    c.lambda = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("a hit never widens a single packet")
{
    const auto c = small();
    auto var = [&](const StateVector& s) {
        const auto p = position_marginal(s, 0);
        double m = 0, m2 = 0, tot = 0;
        for (std::size_t j = 0; j < p.size(); ++j) tot += p[j], m += p[j] * c.position(j), m2 += p[j] * c.position(j) * c.position(j);
        return m2 / tot - (m / tot) * (m / tot);
    };
    for (double z : {-2.0, 0.0, 0.7, 3.0}) {
        auto psi = gaussian_packet(c, 0.0, 1.5);
        const double before = var(psi);
        apply_localization(psi, c, 0, z, c.r);
        CHECK(var(psi) <= before + 1e-12);
    }
}

TEST_CASE("lambda = 0 is pure Schrodinger evolution")
{
    auto c = small();
    c.lambda = 0.0;
    c.hamiltonian = HamiltonianKind::harmonic;
    c.T = 0.5;
    c.dt = 0.01;
    const auto init = gaussian_packet(c, 1.0, 0.7);
    RngStream rng(1, 0);
    const auto traj = run_grw(c, init, rng);
    CHECK(traj.hits.empty());
    auto psi = init;
    SchrodingerStepper step(c);
    for (int i = 0; i < 50; ++i) step.step(psi, 0.01);
    CHECK((traj.final_state.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
}

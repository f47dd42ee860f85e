#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "collapse/errors.hpp"
#include "collapse/kernels.hpp"
#include "collapse/matter.hpp"
#include "collapse/rel_branch.hpp"
#include "collapse/rel_exact.hpp"
#include "collapse/relmodel.hpp"

using namespace collapse;
using namespace collapse::rel;

TEST_CASE("causal relations on the lattice")
{
    const SpacetimeLattice lat(6, 6);
    CHECK(causal_relation(lat, {2, 2}, {2, 2}) == Causal::equal);
    CHECK(causal_relation(lat, {2, 2}, {3, 3}) == Causal::future);
    CHECK(causal_relation(lat, {3, 3}, {2, 2}) == Causal::past);
    CHECK(causal_relation(lat, {2, 2}, {2, 3}) == Causal::spacelike);
    CHECK(causal_relation(lat, {2, 2}, {3, 4}) == Causal::spacelike);
    const SpacetimeLattice wide(4, 8, 1.0, 2.0);
    CHECK(wide.cone_lag(1) == 2);
    CHECK(lat.cone_lag(0) == 0);
}

TEST_CASE("hypersurface admissibility")
{
    const SpacetimeLattice lat(3, 3);
    Hypersurface h(lat);
    CHECK(h.admissible({0, 1}));
    h.advance({0, 1});
    CHECK_FALSE(h.admissible({1, 1}));  // neighbours at row 0 not absorbed yet
    CHECK_THROWS_AS(h.advance({1, 1}), OrderingError);
    h.advance({0, 0});
    h.advance({0, 2});
    h.advance({1, 1});
    CHECK(h.absorbed_count() == 4);
    CHECK(h.is_spacelike());
}

TEST_CASE("random admissible orders cover every cell once")
{
    const SpacetimeLattice lat(5, 5);
    RngStream rng(1, 0);
    const auto order = random_admissible_order(lat, rng);
    CHECK(order.size() == 25);
    std::set<Cell> seen(order.begin(), order.end());
    CHECK(seen.size() == 25);
    Hypersurface h(lat);
    for (auto c : order) {
        REQUIRE(h.admissible(c));
        h.advance(c);
    }
    CHECK(h.complete());
    CHECK(order != timeslice_order(lat));
}

TEST_CASE("kernel support and normalization")
{
    const SpacetimeLattice lat(6, 6);
    const CausalKernelPair k(lat, KernelSpec{});
    CHECK(k.is_causal());
    double fsum = 0, gsum = 0;
    for (const auto& e : k.f_window({3, 0})) {
        CHECK(causal_relation(lat, {3, 0}, e.cell) == Causal::past);
        fsum += e.weight;
    }
    for (const auto& e : k.g_window({3, 3})) {
        CHECK(causal_relation(lat, {3, 3}, e.cell) == Causal::future);
        gsum += e.weight;
    }
    CHECK(fsum == doctest::Approx(1.0));  // f renormalized at the edge
    CHECK(gsum == doctest::Approx(1.0));
    CHECK(k.f_window({0, 2}).empty());

    KernelSpec leaky;
    leaky.acausal_leak = 0.5;
    const CausalKernelPair kl(lat, leaky);
    CHECK_FALSE(kl.is_causal());
    bool spacelike = false;
    for (const auto& e : kl.f_window({3, 3})) spacelike = spacelike || causal_relation(lat, {3, 3}, e.cell) == Causal::spacelike;
    CHECK(spacelike);
}

TEST_CASE("matter profiles and exclusive volume")
{
    const SpacetimeLattice lat(4, 10);
    MatterBranchSet m(lat, {cplx(1), cplx(0, 1)});
    m.add_block(0, 1, 5, 2.0);
    m.add_block(1, 3, 8, 1.0);
    CHECK(m.initial_weights()[0] == doctest::Approx(0.5));
    CHECK(m.J(0, {2, 4}) == 2.0);
    CHECK(m.J(0, {2, 5}) == 0.0);
    CHECK(m.exclusive_columns(0, 1) == 2 + 3);
    CHECK_THROWS_AS(m.add_block(2, 0, 1, 1.0), ConfigError);
    CHECK_THROWS_AS(m.add_block(0, 0, 1, -1.0), ConfigError);
    CHECK_THROWS(MatterBranchSet(lat, {cplx(0)}));
}

namespace {

RelConfig single_source(double J, int n_max)
{
    RelConfig c;
    c.n_t = 3;
    c.n_x = 5;
    c.amplitudes = {cplx(1)};
    c.sources = {{0, 2, 3, J, 0, 1}};
    c.tier = Tier::exact;
    c.n_max = n_max;
    c.r = 1.0;
    return c;
}

}  // namespace

TEST_CASE("exact tier: a point source makes coherent states of amplitude J g")
{
    const auto c = single_source(0.9, 8);
    ExactTier tier(c.kernels(), c.matter(), c.n_max, c.dimension_cap);
    CHECK(tier.modes().num_modes() == 3);
    for (int x = 0; x < 5; ++x) tier.tomonaga_step({0, x});
    // |alpha|^2 = (J/3)^2 in each of the three g cells
    for (int x = 1; x <= 3; ++x) CHECK(tier.mean_occupation({1, x}) == doctest::Approx(0.09).epsilon(1e-6));
    CHECK(tier.leakage() < 1e-10);
    CHECK(norm2(tier.state()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("branch tier interior field statistics")
{
    RelConfig c;
    c.n_t = 4;
    c.n_x = 9;
    c.sources = {{0, 0, 9, 1.3, 0, -1}};
    BranchTier tier(c.kernels(), c.matter(), HitMode::clt);
    tier.tomonaga_row(0);
    tier.tomonaga_row(1);
    CHECK(std::abs(tier.alpha(0, {1, 4}) - cplx(0, -1.3)) < 1e-12);
    const auto d = tier.n_distribution(0, {2, 4});
    CHECK(d.mean == doctest::Approx(1.69));
    CHECK(d.var == doctest::Approx(1.69 / 3));
}

TEST_CASE("smeared Poisson enumeration against brute force")
{
    const auto atoms = enumerate_smeared_poisson({{0.5, 1.2}, {0.25, 0.7}});
    double total = 0, mean = 0;
    for (auto [v, p] : atoms) total += p, mean += v * p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx(0.5 * 1.2 + 0.25 * 0.7).epsilon(1e-12));
    // P(value 0.5) = P(n1=1,n2=0) + P(n1=0,n2=2)
    const double pois = std::exp(-1.9);
    double expect = pois * 1.2 + pois * 0.49 / 2;
    double got = 0;
    for (auto [v, p] : atoms)
        if (std::abs(v - 0.5) < 1e-9) got = p;
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("first hit: exact and branch tiers agree with a direct formula")
{
    RelConfig c;
    c.n_t = 3;
    c.n_x = 3;
    c.amplitudes = {cplx(1), cplx(1)};
    c.sources = {{0, 1, 2, 1.5, 0, 1}};
    c.n_max = 14;
    const double r = 0.9, z = 0.6;
    ExactTier ex(c.kernels(), c.matter(), c.n_max, c.dimension_cap);
    BranchTier br(c.kernels(), c.matter(), HitMode::enumerate);
    for (int t = 0; t < 2; ++t) {
        for (int x = 0; x < 3; ++x) ex.tomonaga_step({t, x});
        br.tomonaga_row(t);
    }
    const Cell hit{2, 1};
    ex.apply_hit(hit, z, r);
    br.apply_hit(hit, z, r);
    // f over (1,0..2), each 1/3; the source put J/3 into every one of them
    const double lam = 0.25, f = 1.0 / 3;
    double like0 = 0;
    for (int n0 = 0; n0 < 25; ++n0)
        for (int n1 = 0; n1 < 25; ++n1)
            for (int n2 = 0; n2 < 25; ++n2) {
                double p = std::exp(-3 * lam) * std::pow(lam, n0 + n1 + n2) / (std::tgamma(n0 + 1.0) * std::tgamma(n1 + 1.0) * std::tgamma(n2 + 1.0));
                const double n = f * (n0 + n1 + n2);
                like0 += p * std::exp(-(n - z) * (n - z) / (r * r));
            }
    const double like1 = std::exp(-z * z / (r * r));
    const double w0 = like0 / (like0 + like1);
    CHECK(ex.branch_populations()[0] == doctest::Approx(w0).epsilon(1e-9));
    CHECK(br.weights()[0] == doctest::Approx(w0).epsilon(1e-9));
}

TEST_CASE("run_relativistic: reproducible; order independent")
{
    RelConfig c;
    c.n_t = 4;
    c.n_x = 4;
    c.amplitudes = {cplx(1), cplx(1)};
    c.sources = {{0, 1, 2, 1.0, 0, 1}, {1, 2, 3, 1.0, 1, 2}};
    c.tier = Tier::exact;
    c.n_max = 5;
    c.mu = 1.5;
    c.r = 0.7;
    RunControls keep;
    keep.keep_final_state = true;
    keep.order = timeslice_order(c.lattice());
    RngStream a(3, 1), b(3, 1);
    const auto ra = run_relativistic(c, a, keep);
    const auto rb = run_relativistic(c, b, keep);
    REQUIRE(ra.hit_count > 0);
    CHECK(ra.final_state->amplitudes() == rb.final_state->amplitudes());

    std::vector<double> zs(ra.hit_count);
    for (const auto& h : ra.hits) zs[h.index] = h.z;
    RngStream order_rng(9, 9);
    RunControls other;
    other.order = random_admissible_order(c.lattice(), order_rng);
    other.replay_z = zs;
    other.keep_final_state = true;
    RngStream d(3, 1);
    const auto rd = run_relativistic(c, d, other);
    CHECK((ra.final_state->amplitudes() - rd.final_state->amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(joint_probability(ra) == doctest::Approx(joint_probability(rd)).epsilon(1e-9));
}

TEST_CASE("reduction time edge cases")
{
    RelConfig c;
    c.n_t = 3;
    c.n_x = 3;
    c.amplitudes = {cplx(1), cplx(0)};
    c.mu = 1.0;
    RngStream rng(1, 1);
    const auto rec = run_relativistic(c, rng);
    CHECK(rec.tau.has_value());
    CHECK(*rec.tau == 0.0);
    CHECK(reduction_time(rec, 0.99) == 0.0);
}

TEST_CASE("exact tier over the cap reports its dimension")
{
    RelConfig c;
    c.n_t = 4;
    c.n_x = 6;
    c.tier = Tier::exact;
    c.sources = {{0, 0, 6, 1.0, 0, -1}};
    c.n_max = 4;
    c.dimension_cap = 1000;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(std::to_string(c.exact_dimension())) != std::string::npos);
    }
}

TEST_CASE("invalid relativistic parameters")
{
    RelConfig c;
    c.mu = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RelConfig{};
    c.r = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RelConfig{};
    c.threshold = 0.3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("mean log-weight drift per hit")
{
    RelConfig c;
    c.n_t = 3;
    c.n_x = 12;
    c.amplitudes = {cplx(1), cplx(1)};
    c.sources = {{0, 0, 6, 1.0, 0, -1}, {1, 6, 12, 1.0, 0, -1}};
    BranchTier base(c.kernels(), c.matter(), HitMode::clt);
    base.tomonaga_row(0);
    base.tomonaga_row(1);
    const double r = 6.0;
    const Cell x{2, 2};
    const auto d0 = base.n_distribution(0, x), d1 = base.n_distribution(1, x);
    CHECK(d0.mean == doctest::Approx(1.0));
    CHECK(d1.mean == 0.0);
    RngStream rng(5, 5);
    double sum = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        BranchTier t = base;
        const double z = rng.normal(d0.mean, std::sqrt(d0.var + r * r / 2));
        t.apply_hit(x, z, r);
        const auto w = t.weights();
        sum += std::log(w[0] / w[1]);
    }
    const double expected = std::pow(d0.mean - d1.mean, 2) / (2 * (d0.var + r * r / 2));
    CHECK(sum / n == doctest::Approx(expected).epsilon(0.1));
}

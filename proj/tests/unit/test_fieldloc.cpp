#include <doctest.h>

#include <cmath>

#include "collapse/errors.hpp"
#include "collapse/fieldloc.hpp"
#include "collapse/localization.hpp"

using namespace collapse;
using namespace collapse::fieldloc;

TEST_CASE("delta kernel gives the site number operator")
{
    const auto s = make_field_space(3, 2);
    const auto n1 = smeared_number_op(1, SmearKernel::delta(), s);
    CHECK(n1.is_diagonal());
    const auto st = occupation_state(s, {0, 2, 1});
    const auto idx = s->index(std::vector<std::size_t>{0, 2, 1});
    CHECK(n1.diagonal_entries()[static_cast<Eigen::Index>(idx)] == 2.0);
    CHECK(norm2(st) == 1.0);
}

TEST_CASE("gaussian kernel weights are normalized")
{
    const auto k = SmearKernel::gaussian(1.0, 2);
    double sum = 0;
    for (const auto& [o, w] : k.weights()) sum += w;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(k.at(1) == doctest::Approx(k.at(-1)));
    CHECK(k.at(3) == 0.0);
}

TEST_CASE("hopping conserves total number")
{
    const auto s = make_field_space(3, 2);
    const auto h = hopping_hamiltonian(s, 0.5);
    CHECK(h.is_hermitian());
    CHECK(commutator_norm(h, total_number_op(s)) < 1e-12);
}

TEST_CASE("field hit collapses a one-particle superposition")
{
    const auto s = make_field_space(2, 1);
    auto psi = occupation_state(s, {1, 0});
    psi.amplitudes() = (psi.amplitudes() + occupation_state(s, {0, 1}).amplitudes()) / std::sqrt(2.0);
    const auto n0 = smeared_number_op(0, SmearKernel::delta(), s);
    apply_field_hit(psi, n0, 1.0, 0.2);
    psi.normalize();
    const auto idx = s->index(std::vector<std::size_t>{1, 0});
    CHECK(std::norm(psi[idx]) > 0.999);
}

TEST_CASE("run_fieldloc: unitarity without hits, site snapping")
{
    FieldLocConfig c;
    c.n_sites = 3;
    c.n_max = 2;
    c.mu = 0.0;
    c.hopping = 0.3;
    c.T = 2.0;
    const auto s = make_field_space(3, 2);
    RngStream rng(1, 0);
    const auto traj = run_fieldloc(c, occupation_state(s, {1, 0, 0}), rng);
    CHECK(traj.hits.empty());
    CHECK(norm2(traj.final_state) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(snap_to_site(0.4, 3) == 0);
    CHECK(snap_to_site(1.6, 3) == 2);
    CHECK(snap_to_site(2.6, 3) == 0);  // periodic
    CHECK(snap_to_site(0.5, 3) == 0);
}

TEST_CASE("fieldloc rejects bad sizes")
{
    FieldLocConfig c;
    c.n_max = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("hits at different sites commute and conserve total number")
{
    const auto s = make_field_space(3, 2);
    const auto k = SmearKernel::gaussian(0.8, 1);
    StateVector psi = StateVector::zero(s);
    psi[s->index(std::vector<std::size_t>{2, 0, 0})] = 0.6;
    psi[s->index(std::vector<std::size_t>{0, 1, 1})] = cplx(0, 0.8);
    const auto n0 = smeared_number_op(0, k, s), n2 = smeared_number_op(2, k, s);
    auto a = psi, b = psi;
    apply_field_hit(a, n0, 0.4, 0.5);
    apply_field_hit(a, n2, 1.1, 0.5);
    apply_field_hit(b, n2, 1.1, 0.5);
    apply_field_hit(b, n0, 0.4, 0.5);
    CHECK((a.amplitudes() - b.amplitudes()).cwiseAbs().maxCoeff() < 1e-12);
    a.normalize();
    const auto total = total_number_op(s);
    CHECK(std::real(inner(a, apply(total, a))) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("small r acts as a projective number measurement")
{
    const auto s = make_field_space(1, 3);
    StateVector psi(s, Eigen::VectorXcd::Constant(4, 0.5));
    apply_field_hit(psi, smeared_number_op(0, SmearKernel::delta(), s), 2.1, 0.05);
    psi.normalize();
    CHECK(std::norm(psi[2]) > 1 - 1e-12);
}

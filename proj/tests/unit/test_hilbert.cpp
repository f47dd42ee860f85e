#include <doctest.h>

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

#include "collapse/errors.hpp"
#include "collapse/hilbert.hpp"

using namespace collapse;

TEST_CASE("row-major basis indexing")
{
    const auto s = make_space({Factor::reg(2), Factor::fock(2), Factor::grid(4)});
    CHECK(s->dim() == 2 * 3 * 4);
    const std::vector<std::size_t> m{1, 2, 3};
    const auto idx = s->index(m);
    CHECK(idx == 1 * 12 + 2 * 4 + 3);
    CHECK(s->multi_index(idx) == m);
    CHECK(s->digit(idx, 1) == 2);
}

TEST_CASE("ladder operators on a truncated mode")
{
    const auto s = make_space({Factor::fock(3)});
    const auto a = ladder(s, 0, Ladder::lower);
    const auto ad = ladder(s, 0, Ladder::raise);
    const auto n = number_op(s, 0);
    CHECK(n.is_diagonal());
    // a^dag a equals N exactly, even at the cutoff
    CHECK((ad * a).to_dense().isApprox(n.to_dense(), 1e-14));
    // a|2> = sqrt(2)|1>
    const auto out = apply(a, StateVector::basis(s, 2));
    CHECK(std::abs(out[1] - std::sqrt(2.0)) < 1e-14);
    // the commutator is 1 except at the top level, where it is -n_max
    const auto c = commutator(a, ad).to_dense();
    CHECK(std::abs(c(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(c(3, 3) + 3.0) < 1e-14);
}

TEST_CASE("norms, inner products and normalize")
{
    const auto s = make_space({Factor::grid(3)});
    Eigen::VectorXcd v(3);
    v << cplx(1, 1), 0, cplx(0, 2);
    StateVector psi(s, v);
    CHECK(norm2(psi) == doctest::Approx(6.0));
    CHECK(psi.normalize() == doctest::Approx(6.0));
    CHECK(norm2(psi) == doctest::Approx(1.0));
    CHECK(std::abs(inner(psi, psi) - 1.0) < 1e-14);
}

TEST_CASE("unitary_of is unitary and matches the closed form on a diagonal")
{
    const auto s = make_space({Factor::fock(4)});
    const auto x = field_quadrature(4);
    const auto u = expm_hermitian(x, 0.7);
    CHECK((u.adjoint() * u).isApprox(Eigen::MatrixXcd::Identity(5, 5), 1e-12));
    const auto n = number_op(s, 0);
    const auto un = unitary_of(n, 0.3).to_dense();
    for (int k = 0; k < 5; ++k) CHECK(std::abs(un(k, k) - std::exp(cplx(0, -0.3 * k))) < 1e-13);
}

TEST_CASE("field quadrature is a + a^dag")
{
    const auto x = field_quadrature(3);
    CHECK(std::abs(x(0, 1) - 1.0) < 1e-14);
    CHECK(std::abs(x(2, 1) - std::sqrt(2.0)) < 1e-14);
    CHECK(x.isApprox(x.adjoint()));
}

TEST_CASE("operators on different modes commute")
{
    const auto s = make_space({Factor::fock(2), Factor::fock(2)});
    CHECK(commutator_norm(number_op(s, 0), ladder(s, 1, Ladder::raise)) == 0.0);
    CHECK(commutator_norm(number_op(s, 0), ladder(s, 0, Ladder::raise)) > 0.5);
}

TEST_CASE("apply_on_factor agrees with the full operator")
{
    const auto s = make_space({Factor::fock(2), Factor::fock(2)});
    Eigen::VectorXcd v = Eigen::VectorXcd::Random(9);
    StateVector psi(s, v);
    const auto u = expm_hermitian(field_quadrature(2), 0.4);
    StateVector local = psi;
    apply_on_factor(local, 1, u);
    Eigen::MatrixXcd full = Eigen::kroneckerProduct(Eigen::MatrixXcd::Identity(3, 3), u);
    CHECK((full * v).isApprox(local.amplitudes(), 1e-13));
}

TEST_CASE("marginals and top-level population")
{
    const auto s = make_space({Factor::fock(1), Factor::fock(2)});
    StateVector psi = StateVector::zero(s);
    psi[s->index(std::vector<std::size_t>{0, 2})] = std::sqrt(0.25);
    psi[s->index(std::vector<std::size_t>{1, 0})] = std::sqrt(0.75);
    const auto m = factor_marginal(psi, 1);
    CHECK(m[0] == doctest::Approx(0.75));
    CHECK(m[2] == doctest::Approx(0.25));
    CHECK(max_top_level_probability(psi) == doctest::Approx(0.75));
}

TEST_CASE("mismatched spaces are rejected")
{
    const auto a = make_space({Factor::fock(1)});
    const auto b = make_space({Factor::fock(2)});
    CHECK_THROWS_AS(apply(number_op(a, 0), StateVector::basis(b, 0)), UsageError);
    CHECK_THROWS(make_space({Factor::fock(-1)}));
}

TEST_CASE("random Hermitian generator gives a unitary")
{
    const auto s = make_space({Factor::grid(8)});
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Random(8, 8);
    const Eigen::MatrixXcd h = m + m.adjoint();
    const auto u = unitary_of(LinearOperator::dense(s, h), 0.37).to_dense();
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
    // eigendecomposition oracle, computed independently here
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    Eigen::VectorXcd phase = (es.eigenvalues().cast<cplx>() * cplx(0, -0.37)).array().exp();
    const Eigen::MatrixXcd ref = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    CHECK((u - ref).cwiseAbs().maxCoeff() < 1e-10);
    StateVector psi(s, Eigen::VectorXcd::Random(8));
    const double before = norm2(psi);
    CHECK(norm2(apply(LinearOperator::dense(s, u), psi)) == doctest::Approx(before).epsilon(1e-10));
}

TEST_CASE("[a, a^dag] is the identity below the cutoff")
{
    const auto s = make_space({Factor::fock(5)});
    const auto c = commutator(ladder(s, 0, Ladder::lower), ladder(s, 0, Ladder::raise)).to_dense();
    for (int n = 0; n < 5; ++n) CHECK(std::abs(c(n, n) - 1.0) < 1e-14);
}

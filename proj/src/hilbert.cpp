#include "collapse/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "collapse/errors.hpp"

namespace collapse {

std::size_t Factor::dim() const
{
    switch (kind) {
    case FactorKind::fock: return static_cast<std::size_t>(size) + 1;
    case FactorKind::grid:
    case FactorKind::reg: return static_cast<std::size_t>(size);
    }
    return 0;
}

HilbertSpace::HilbertSpace(std::vector<Factor> factors) : factors_(std::move(factors))
{
    for (const auto& f : factors_) {
        switch (f.kind) {
        case FactorKind::fock:
            if (f.size < 1) throw ConfigError("fock factor requires n_max >= 1, got " + std::to_string(f.size));
            break;
        case FactorKind::grid:
            if (f.size < 2) throw ConfigError("grid factor requires n_sites >= 2, got " + std::to_string(f.size));
            break;
        case FactorKind::reg:
            if (f.size < 1) throw ConfigError("register factor requires K >= 1, got " + std::to_string(f.size));
            break;
        }
    }
    dims_.resize(factors_.size());
    strides_.resize(factors_.size());
    std::size_t stride = 1;
    for (std::size_t i = factors_.size(); i-- > 0;) {
        dims_[i] = factors_[i].dim();
        strides_[i] = stride;
        stride *= dims_[i];
    }
    dim_ = stride;
}

std::vector<std::size_t> HilbertSpace::multi_index(std::size_t index) const
{
    if (index >= dim_) throw UsageError("basis index out of range");
    std::vector<std::size_t> multi(factors_.size());
    for (std::size_t f = 0; f < factors_.size(); ++f) multi[f] = digit(index, f);
    return multi;
}

std::size_t HilbertSpace::index(std::span<const std::size_t> multi) const
{
    if (multi.size() != factors_.size()) throw UsageError("multi-index has wrong length");
    std::size_t idx = 0;
    for (std::size_t f = 0; f < factors_.size(); ++f) {
        if (multi[f] >= dims_[f]) throw UsageError("multi-index digit out of range");
        idx += multi[f] * strides_[f];
    }
    return idx;
}

SpacePtr make_space(std::vector<Factor> factors)
{
    return std::make_shared<const HilbertSpace>(std::move(factors));
}

// ---------------------------------------------------------------------------

StateVector::StateVector(SpacePtr space, Eigen::VectorXcd amplitudes)
    : space_(std::move(space)), amps_(std::move(amplitudes))
{
    if (!space_) throw UsageError("state vector needs a space");
    if (static_cast<std::size_t>(amps_.size()) != space_->dim())
        throw UsageError("amplitude count does not match space dimension");
}

StateVector StateVector::zero(SpacePtr space)
{
    const auto d = static_cast<Eigen::Index>(space->dim());
    return StateVector(std::move(space), Eigen::VectorXcd::Zero(d));
}

StateVector StateVector::basis(SpacePtr space, std::size_t index)
{
    if (index >= space->dim()) throw UsageError("basis index out of range");
    auto s = zero(std::move(space));
    s[index] = 1.0;
    return s;
}

double StateVector::normalize()
{
    const double n2 = amps_.squaredNorm();
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw DegenerateStateError("cannot normalize a zero or non-finite state");
    amps_ /= std::sqrt(n2);
    return n2;
}

// ---------------------------------------------------------------------------

LinearOperator::LinearOperator(SpacePtr space, std::variant<Eigen::VectorXd, Eigen::MatrixXcd> rep)
    : space_(std::move(space)), rep_(std::move(rep))
{
}

LinearOperator LinearOperator::diagonal(SpacePtr space, Eigen::VectorXd entries)
{
    if (static_cast<std::size_t>(entries.size()) != space->dim())
        throw UsageError("diagonal length does not match space dimension");
    return LinearOperator(std::move(space), std::move(entries));
}

LinearOperator LinearOperator::dense(SpacePtr space, Eigen::MatrixXcd matrix)
{
    const auto d = static_cast<Eigen::Index>(space->dim());
    if (matrix.rows() != d || matrix.cols() != d) throw UsageError("matrix shape does not match space dimension");
    return LinearOperator(std::move(space), std::move(matrix));
}

LinearOperator LinearOperator::identity(SpacePtr space)
{
    const auto d = static_cast<Eigen::Index>(space->dim());
    return diagonal(std::move(space), Eigen::VectorXd::Ones(d));
}

const Eigen::VectorXd& LinearOperator::diagonal_entries() const
{
    if (!is_diagonal()) throw UsageError("operator is not diagonal");
    return std::get<Eigen::VectorXd>(rep_);
}

Eigen::MatrixXcd LinearOperator::to_dense() const
{
    if (is_diagonal()) return std::get<Eigen::VectorXd>(rep_).cast<cplx>().asDiagonal();
    return std::get<Eigen::MatrixXcd>(rep_);
}

bool LinearOperator::is_hermitian(double tol) const
{
    if (is_diagonal()) return true;
    const auto& m = std::get<Eigen::MatrixXcd>(rep_);
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

void LinearOperator::require_same_space(const LinearOperator& other) const
{
    if (!(*space_ == *other.space_)) throw UsageError("operators act on different spaces");
}

LinearOperator LinearOperator::operator+(const LinearOperator& rhs) const
{
    require_same_space(rhs);
    if (is_diagonal() && rhs.is_diagonal())
        return diagonal(space_, diagonal_entries() + rhs.diagonal_entries());
    return dense(space_, to_dense() + rhs.to_dense());
}

LinearOperator LinearOperator::operator-(const LinearOperator& rhs) const
{
    require_same_space(rhs);
    if (is_diagonal() && rhs.is_diagonal())
        return diagonal(space_, diagonal_entries() - rhs.diagonal_entries());
    return dense(space_, to_dense() - rhs.to_dense());
}

LinearOperator LinearOperator::operator*(const LinearOperator& rhs) const
{
    require_same_space(rhs);
    if (is_diagonal() && rhs.is_diagonal())
        return diagonal(space_, diagonal_entries().cwiseProduct(rhs.diagonal_entries()));
    if (is_diagonal()) return dense(space_, diagonal_entries().cast<cplx>().asDiagonal() * rhs.to_dense());
    if (rhs.is_diagonal()) return dense(space_, to_dense() * rhs.diagonal_entries().cast<cplx>().asDiagonal());
    return dense(space_, std::get<Eigen::MatrixXcd>(rep_) * std::get<Eigen::MatrixXcd>(rhs.rep_));
}

LinearOperator LinearOperator::scaled(cplx factor) const
{
    if (is_diagonal() && factor.imag() == 0.0) return diagonal(space_, diagonal_entries() * factor.real());
    return dense(space_, to_dense() * factor);
}

// ---------------------------------------------------------------------------

namespace {

void require_fock(const SpacePtr& space, std::size_t mode)
{
    if (mode >= space->num_factors()) throw UsageError("factor index out of range");
    if (space->factor(mode).kind != FactorKind::fock) throw UsageError("factor " + std::to_string(mode) + " is not a fock mode");
}

}  // namespace

LinearOperator ladder(const SpacePtr& space, std::size_t mode, Ladder kind)
{
    require_fock(space, mode);
    const auto d = static_cast<Eigen::Index>(space->dim());
    const std::size_t n_max = static_cast<std::size_t>(space->factor(mode).size);
    const std::size_t stride = space->stride(mode);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t b = 0; b < space->dim(); ++b) {
        const std::size_t n = space->digit(b, mode);
        if (kind == Ladder::raise && n < n_max)
            m(static_cast<Eigen::Index>(b + stride), static_cast<Eigen::Index>(b)) = std::sqrt(static_cast<double>(n + 1));
        if (kind == Ladder::lower && n > 0)
            m(static_cast<Eigen::Index>(b - stride), static_cast<Eigen::Index>(b)) = std::sqrt(static_cast<double>(n));
    }
    return LinearOperator::dense(space, std::move(m));
}

LinearOperator number_op(const SpacePtr& space, std::size_t mode)
{
    require_fock(space, mode);
    Eigen::VectorXd diag(static_cast<Eigen::Index>(space->dim()));
    for (std::size_t b = 0; b < space->dim(); ++b)
        diag[static_cast<Eigen::Index>(b)] = static_cast<double>(space->digit(b, mode));
    return LinearOperator::diagonal(space, std::move(diag));
}

StateVector apply(const LinearOperator& op, const StateVector& state)
{
    if (!(*op.space() == *state.space())) throw UsageError("operator and state live on different spaces");
    if (op.is_diagonal())
        return StateVector(state.space(), op.diagonal_entries().cast<cplx>().cwiseProduct(state.amplitudes()));
    return StateVector(state.space(), op.to_dense() * state.amplitudes());
}

double norm2(const StateVector& state) { return state.amplitudes().squaredNorm(); }

cplx inner(const StateVector& a, const StateVector& b)
{
    if (!(*a.space() == *b.space())) throw UsageError("inner product of states on different spaces");
    return a.amplitudes().dot(b.amplitudes());  // conjugates the first argument
}

Eigen::MatrixXcd expm_hermitian(const Eigen::MatrixXcd& h, double angle)
{
    if (h.rows() != h.cols()) throw UsageError("generator must be square");
    if (h.size() > 0 && (h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw NumericalError("generator is not Hermitian within 1e-12");
    if (angle == 0.0) return Eigen::MatrixXcd::Identity(h.rows(), h.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    if (eig.info() != Eigen::Success) throw NumericalError("Hermitian eigendecomposition failed");
    const Eigen::VectorXcd phases =
        (eig.eigenvalues().cast<cplx>() * cplx(0.0, -angle)).array().exp().matrix();
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

LinearOperator unitary_of(const LinearOperator& op, double angle)
{
    if (op.is_diagonal()) {
        const auto& d = op.diagonal_entries();
        Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(d.size(), d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) u(i, i) = std::exp(cplx(0.0, -angle * d[i]));
        return LinearOperator::dense(op.space(), std::move(u));
    }
    if (!op.is_hermitian(1e-12)) throw NumericalError("unitary_of requires a Hermitian operator (tolerance 1e-12)");
    Eigen::MatrixXcd u = expm_hermitian(op.to_dense(), angle);
    const double defect =
        (u.adjoint() * u - Eigen::MatrixXcd::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
    if (defect >= 1e-10) throw NumericalError("exponential lost unitarity: defect " + std::to_string(defect));
    return LinearOperator::dense(op.space(), std::move(u));
}

Eigen::MatrixXcd field_quadrature(int n_max)
{
    const Eigen::Index d = n_max + 1;
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index n = 1; n < d; ++n) {
        const double s = std::sqrt(static_cast<double>(n));
        x(n - 1, n) = s;
        x(n, n - 1) = s;
    }
    return x;
}

LinearOperator commutator(const LinearOperator& a, const LinearOperator& b)
{
    if (!(*a.space() == *b.space())) throw UsageError("commutator of operators on different spaces");
    if (a.is_diagonal() && b.is_diagonal())
        return LinearOperator::diagonal(a.space(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a.space()->dim())));
    // [D, M]_ij = (d_i - d_j) M_ij
    if (a.is_diagonal() || b.is_diagonal()) {
        const bool a_diag = a.is_diagonal();
        const Eigen::VectorXd& d = a_diag ? a.diagonal_entries() : b.diagonal_entries();
        Eigen::MatrixXcd m = a_diag ? b.to_dense() : a.to_dense();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) *= (d[i] - d[j]);
        if (!a_diag) m = -m;
        return LinearOperator::dense(a.space(), std::move(m));
    }
    return a * b - b * a;
}

double commutator_norm(const LinearOperator& a, const LinearOperator& b)
{
    const auto c = commutator(a, b);
    if (c.is_diagonal()) return c.diagonal_entries().size() ? c.diagonal_entries().cwiseAbs().maxCoeff() : 0.0;
    return c.to_dense().cwiseAbs().maxCoeff();
}

namespace {

template <typename Pred>
void apply_on_factor_impl(StateVector& state, std::size_t f, const Eigen::MatrixXcd& m, Pred keep)
{
    const auto& space = *state.space();
    if (f >= space.num_factors()) throw UsageError("factor index out of range");
    const std::size_t d = space.factor_dim(f);
    if (static_cast<std::size_t>(m.rows()) != d || static_cast<std::size_t>(m.cols()) != d)
        throw UsageError("local matrix does not match factor dimension");
    const std::size_t stride = space.stride(f);
    const std::size_t block = d * stride;
    auto& amps = state.amplitudes();
    Eigen::VectorXcd in(static_cast<Eigen::Index>(d));
    Eigen::VectorXcd out(static_cast<Eigen::Index>(d));
    for (std::size_t hi = 0; hi < space.dim(); hi += block) {
        for (std::size_t lo = 0; lo < stride; ++lo) {
            const std::size_t base = hi + lo;
            if (!keep(base)) continue;
            for (std::size_t j = 0; j < d; ++j) in[static_cast<Eigen::Index>(j)] = amps[static_cast<Eigen::Index>(base + j * stride)];
            out.noalias() = m * in;
            for (std::size_t j = 0; j < d; ++j) amps[static_cast<Eigen::Index>(base + j * stride)] = out[static_cast<Eigen::Index>(j)];
        }
    }
}

}  // namespace

void apply_on_factor(StateVector& state, std::size_t f, const Eigen::MatrixXcd& m)
{
    apply_on_factor_impl(state, f, m, [](std::size_t) { return true; });
}

void apply_on_factor(StateVector& state, std::size_t f, const Eigen::MatrixXcd& m,
                     std::size_t reg_factor, std::size_t reg_value)
{
    if (reg_factor == f) throw UsageError("register restriction cannot target the acted-on factor");
    const auto& space = *state.space();
    apply_on_factor_impl(state, f, m, [&](std::size_t base) { return space.digit(base, reg_factor) == reg_value; });
}

std::vector<double> factor_marginal(const StateVector& state, std::size_t f)
{
    const auto& space = *state.space();
    if (f >= space.num_factors()) throw UsageError("factor index out of range");
    std::vector<double> p(space.factor_dim(f), 0.0);
    const auto& amps = state.amplitudes();
    for (std::size_t b = 0; b < space.dim(); ++b) p[space.digit(b, f)] += std::norm(amps[static_cast<Eigen::Index>(b)]);
    return p;
}

double max_top_level_probability(const StateVector& state)
{
    const auto& space = *state.space();
    const double total = norm2(state);
    if (!(total > 0.0)) return 0.0;
    double worst = 0.0;
    for (std::size_t f = 0; f < space.num_factors(); ++f) {
        if (space.factor(f).kind != FactorKind::fock) continue;
        const auto p = factor_marginal(state, f);
        worst = std::max(worst, p.back() / total);
    }
    return worst;
}

}  // namespace collapse

#pragma once

// Truncated tensor-product Hilbert spaces: bosonic modes with an occupancy
// cutoff, particle position registers and branch labels.
//
// Basis indices are row-major over the factor list: the first factor is the
// most significant digit.

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace collapse {

using cplx = std::complex<double>;

enum class FactorKind { fock, grid, reg };

struct Factor {
    FactorKind kind;
    /// n_max for fock, number of sites for grid, K for reg.
    int size;

    static Factor fock(int n_max) { return {FactorKind::fock, n_max}; }
    static Factor grid(int n_sites) { return {FactorKind::grid, n_sites}; }
    static Factor reg(int k) { return {FactorKind::reg, k}; }

    std::size_t dim() const;
    bool operator==(const Factor&) const = default;
};

class HilbertSpace {
public:
    explicit HilbertSpace(std::vector<Factor> factors);

    std::size_t dim() const { return dim_; }
    std::size_t num_factors() const { return factors_.size(); }
    const std::vector<Factor>& factors() const { return factors_; }
    const Factor& factor(std::size_t i) const { return factors_.at(i); }
    std::size_t factor_dim(std::size_t i) const { return dims_[i]; }
    std::size_t stride(std::size_t i) const { return strides_[i]; }

    /// Value of factor `f` in basis state `index`.
    std::size_t digit(std::size_t index, std::size_t f) const
    {
        return (index / strides_[f]) % dims_[f];
    }

    std::vector<std::size_t> multi_index(std::size_t index) const;
    std::size_t index(std::span<const std::size_t> multi) const;

    bool operator==(const HilbertSpace& other) const { return factors_ == other.factors_; }

private:
    std::vector<Factor> factors_;
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> strides_;
    std::size_t dim_ = 1;
};

using SpacePtr = std::shared_ptr<const HilbertSpace>;

/// Throws ConfigError on non-positive sizes (fock n_max >= 1, grid >= 2, reg >= 1).
SpacePtr make_space(std::vector<Factor> factors);

class StateVector {
public:
    StateVector(SpacePtr space, Eigen::VectorXcd amplitudes);

    static StateVector zero(SpacePtr space);
    static StateVector basis(SpacePtr space, std::size_t index);

    const SpacePtr& space() const { return space_; }
    std::size_t dim() const { return static_cast<std::size_t>(amps_.size()); }

    const Eigen::VectorXcd& amplitudes() const { return amps_; }
    Eigen::VectorXcd& amplitudes() { return amps_; }

    cplx operator[](std::size_t i) const { return amps_[static_cast<Eigen::Index>(i)]; }
    cplx& operator[](std::size_t i) { return amps_[static_cast<Eigen::Index>(i)]; }

    /// Scales to unit norm and returns the previous norm squared.
    double normalize();

private:
    SpacePtr space_;
    Eigen::VectorXcd amps_;
};

class LinearOperator {
public:
    static LinearOperator diagonal(SpacePtr space, Eigen::VectorXd entries);
    static LinearOperator dense(SpacePtr space, Eigen::MatrixXcd matrix);
    static LinearOperator identity(SpacePtr space);

    const SpacePtr& space() const { return space_; }
    bool is_diagonal() const { return std::holds_alternative<Eigen::VectorXd>(rep_); }

    /// Requires is_diagonal().
    const Eigen::VectorXd& diagonal_entries() const;
    /// Dense copy regardless of representation.
    Eigen::MatrixXcd to_dense() const;

    bool is_hermitian(double tol = 1e-12) const;

    LinearOperator operator+(const LinearOperator& rhs) const;
    LinearOperator operator-(const LinearOperator& rhs) const;
    LinearOperator operator*(const LinearOperator& rhs) const;
    LinearOperator scaled(cplx factor) const;

private:
    LinearOperator(SpacePtr space, std::variant<Eigen::VectorXd, Eigen::MatrixXcd> rep);
    void require_same_space(const LinearOperator& other) const;

    SpacePtr space_;
    std::variant<Eigen::VectorXd, Eigen::MatrixXcd> rep_;
};

enum class Ladder { raise, lower };

/// Truncated creation/annihilation operator on fock factor `mode`.
LinearOperator ladder(const SpacePtr& space, std::size_t mode, Ladder kind);
LinearOperator number_op(const SpacePtr& space, std::size_t mode);

StateVector apply(const LinearOperator& op, const StateVector& state);
double norm2(const StateVector& state);
cplx inner(const StateVector& a, const StateVector& b);

/// exp(-i * angle * op). Diagonal input stays diagonal; dense input goes
/// through a Hermitian eigendecomposition.
LinearOperator unitary_of(const LinearOperator& op, double angle);

/// exp(-i * angle * h) for a small Hermitian matrix.
Eigen::MatrixXcd expm_hermitian(const Eigen::MatrixXcd& h, double angle);

/// a + a^dagger on a single truncated mode of occupancy 0..n_max.
Eigen::MatrixXcd field_quadrature(int n_max);

LinearOperator commutator(const LinearOperator& a, const LinearOperator& b);
/// Largest element magnitude of [a, b].
double commutator_norm(const LinearOperator& a, const LinearOperator& b);

/// Applies the (d x d) matrix `m` to factor `f` in place. When `reg_factor`
/// is given, only basis states whose register digit equals `reg_value` are
/// touched.
void apply_on_factor(StateVector& state, std::size_t f, const Eigen::MatrixXcd& m);
void apply_on_factor(StateVector& state, std::size_t f, const Eigen::MatrixXcd& m,
                     std::size_t reg_factor, std::size_t reg_value);

/// Marginal probability distribution (unnormalized) over the values of factor `f`.
std::vector<double> factor_marginal(const StateVector& state, std::size_t f);

/// Largest normalized probability found on the top occupancy level of any
/// fock factor. Used as the truncation leakage monitor.
double max_top_level_probability(const StateVector& state);

inline constexpr double kLeakageLimit = 1e-6;

}  // namespace collapse

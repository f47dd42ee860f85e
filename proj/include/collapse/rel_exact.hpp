#pragma once

// Exact tier of the relativistic model: a branch register tensored with one
// truncated mediating mode per represented spacetime cell.

#include <map>
#include <optional>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/kernels.hpp"
#include "collapse/matter.hpp"
#include "collapse/spacetime.hpp"
#include "collapse/stochastic.hpp"

namespace collapse::rel {

/// Which spacetime cells carry a fock factor. Factor 0 is always the branch
/// register reg(K); cell modes follow in lattice order.
class ModeMap {
public:
    ModeMap(std::vector<Cell> cells, int n_max, std::size_t branches = 1);

    const SpacePtr& space() const { return space_; }
    const std::vector<Cell>& cells() const { return cells_; }
    std::size_t num_modes() const { return cells_.size(); }
    int n_max() const { return n_max_; }
    std::size_t branches() const { return branches_; }

    std::optional<std::size_t> factor_of(Cell c) const;
    /// Throws ConfigError naming the cell when it is not represented.
    std::size_t require(Cell c) const;

    /// Dimension K * (n_max + 1)^modes without building the space; saturates
    /// at SIZE_MAX.
    static std::size_t dimension(std::size_t modes, int n_max, std::size_t branches);

private:
    std::vector<Cell> cells_;
    std::map<Cell, std::size_t> factor_;
    int n_max_;
    std::size_t branches_;
    SpacePtr space_;
};

/// Cells that some source cell can excite: the union of g-windows over cells
/// where any branch has J != 0. Every other mode stays in its vacuum.
std::vector<Cell> excitable_cells(const CausalKernelPair& kernels, const MatterBranchSet& matter);

/// N(x) = sum_y f(x, y) n(y); every f-window cell must be represented.
LinearOperator smeared_N(Cell x, const CausalKernelPair& kernels, const ModeMap& modes);
/// A(x) = sum_y g(x, y) (a(y) + a^dag(y)); every g-window cell must be represented.
LinearOperator smeared_A(Cell x, const CausalKernelPair& kernels, const ModeMap& modes);
/// sum_k J_k(x) |k><k| (x) A(x).
LinearOperator interaction_generator(Cell x, const CausalKernelPair& kernels, const ModeMap& modes,
                                     const MatterBranchSet& matter);

/// Closed form of [N(x), A(x')] = sum_y f(x, y) g(x', y) (a^dag(y) - a(y)).
LinearOperator number_field_commutator(Cell x, Cell x_prime, const CausalKernelPair& kernels, const ModeMap& modes);

struct ExactHit {
    double pre_norm2;
    double post_norm2;
};

class ExactTier {
public:
    /// Throws ConfigError when the state dimension exceeds `dimension_cap`.
    ExactTier(const CausalKernelPair& kernels, const MatterBranchSet& matter, int n_max, std::size_t dimension_cap);

    const ModeMap& modes() const { return modes_; }
    const StateVector& state() const { return state_; }
    const Hypersurface& surface() const { return surface_; }

    /// U_x = exp(-i dV sum_k J_k(x) |k><k| (x) A(x)); advances the cut.
    void tomonaga_step(Cell x);

    /// Eigenvalue of N(x) on every basis state (unrepresented cells are vacuum).
    std::vector<double> n_values(Cell x) const;

    double sample_z(Cell x, double r, RngStream& rng) const;
    double z_density(Cell x, double z, double r) const;
    /// Applies L(Z) for N(x), then renormalizes.
    ExactHit apply_hit(Cell x, double z, double r);

    /// Normalized register marginal.
    std::vector<double> branch_populations() const;
    /// <n(y)> in the normalized state; 0 for unrepresented cells.
    double mean_occupation(Cell y) const;
    double leakage() const;

private:
    CausalKernelPair kernels_;
    MatterBranchSet matter_;
    ModeMap modes_;
    StateVector state_;
    Hypersurface surface_;
    Eigen::MatrixXcd x_vectors_;
    Eigen::VectorXd x_values_;
};

}  // namespace collapse::rel

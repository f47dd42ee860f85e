#pragma once

// Branch-coherent tier: each branch carries a scalar weight and a product of
// coherent states alpha_k(y) for the mediating modes. Inter-branch phases are
// dropped, so the tier is only meaningful once branch images are nearly
// orthogonal; overlap() reports how far that holds.

#include <deque>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/kernels.hpp"
#include "collapse/matter.hpp"
#include "collapse/spacetime.hpp"
#include "collapse/stochastic.hpp"

namespace collapse::rel {

enum class HitMode { clt, enumerate };

/// Distribution of N(x) under one branch: its first two moments and, in
/// enumerate mode, the exact support.
struct BranchNDistribution {
    double mean = 0.0;
    double var = 0.0;
    std::vector<std::pair<double, double>> atoms;  // (value, probability), enumerate only
};

/// Exact law of sum_y f_y n_y for independent n_y ~ Poisson(lambda_y).
/// Throws NumericalError past `max_atoms` distinct values.
std::vector<std::pair<double, double>> enumerate_smeared_poisson(const std::vector<std::pair<double, double>>& f_and_lambda,
                                                                 std::size_t max_atoms = 100000);

class BranchTier {
public:
    BranchTier(const CausalKernelPair& kernels, const MatterBranchSet& matter, HitMode mode);

    std::size_t size() const { return log_w_.size(); }
    const Hypersurface& surface() const { return surface_; }
    HitMode mode() const { return mode_; }

    /// Displaces alpha_k(y) by -i J_k(x) g(x, y) dV; checks admissibility.
    void tomonaga_step(Cell x);
    /// Absorbs a whole row at once; the cut must be flat at row t.
    void tomonaga_row(int t);

    cplx alpha(std::size_t k, Cell y) const;
    BranchNDistribution n_distribution(std::size_t k, Cell x) const;

    /// <L^2(Z)>_k: density of Z under branch k.
    double branch_density(std::size_t k, Cell x, double z, double r) const;
    double log_branch_density(std::size_t k, Cell x, double z, double r) const;

    /// Samples a branch from the current weights, then Z from its density.
    double sample_z(Cell x, double r, RngStream& rng) const;
    /// w_k <- w_k <L^2(Z)>_k. Returns the sum of weights before and after,
    /// relative to the pre-hit normalization.
    std::pair<double, double> apply_hit(Cell x, double z, double r);

    std::vector<double> weights() const;
    const std::vector<double>& log_weights() const { return log_w_; }
    /// max over live branch pairs of exp(-1/2 sum_y |alpha_j(y) - alpha_k(y)|^2).
    double overlap() const;
    /// Hits applied while overlap() > 1e-4 and branch means differed.
    std::size_t coherent_hits() const { return coherent_hits_; }

private:
    using Row = std::vector<cplx>;  // n_x * K, branch-major inside a column

    Row* row(int t);
    const Row* row(int t) const;
    void displace(Cell x);
    void evict(int min_row);
    std::size_t pair_index(std::size_t j, std::size_t k) const { return j * log_w_.size() + k; }

    CausalKernelPair kernels_;
    MatterBranchSet matter_;
    HitMode mode_;
    Hypersurface surface_;
    std::vector<double> log_w_;
    std::deque<Row> rows_;
    int first_row_ = 0;
    std::vector<double> dist2_;  // sum_y |alpha_j - alpha_k|^2, K x K
    std::size_t coherent_hits_ = 0;
    std::vector<int> source_columns_;
};

}  // namespace collapse::rel

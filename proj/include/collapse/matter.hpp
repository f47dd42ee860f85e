#pragma once

#include <complex>
#include <vector>

#include "collapse/spacetime.hpp"

namespace collapse::rel {

/// K matter branches with complex amplitudes c_k and classical, non-negative
/// source profiles J_k over lattice cells. J(x) acts on the branch register
/// as sum_k J_k(x) |k><k|.
class MatterBranchSet {
public:
    /// Amplitudes are normalized so that sum |c_k|^2 = 1.
    MatterBranchSet(const SpacetimeLattice& lattice, std::vector<std::complex<double>> amplitudes);

    std::size_t size() const { return amps_.size(); }
    const std::vector<std::complex<double>>& amplitudes() const { return amps_; }
    std::vector<double> initial_weights() const;

    /// Adds J to branch k on columns [x0, x1) for rows [t0, t1). t1 < 0 means "to the last row".
    void add_block(std::size_t k, int x0, int x1, double J, int t0 = 0, int t1 = -1);

    double J(std::size_t k, Cell c) const;
    bool any_source(Cell c) const;
    /// Some block covers column x.
    bool has_column(int x) const;

    /// Columns where exactly one of branches j, k has a nonzero source at row t.
    int exclusive_columns(std::size_t j, std::size_t k, int t = 0) const;

    const SpacetimeLattice& lattice() const { return lattice_; }

private:
    struct Block {
        std::size_t branch;
        int x0, x1, t0, t1;
        double J;
    };

    SpacetimeLattice lattice_;
    std::vector<std::complex<double>> amps_;
    std::vector<Block> blocks_;
    std::vector<std::vector<std::size_t>> by_column_;
};

}  // namespace collapse::rel

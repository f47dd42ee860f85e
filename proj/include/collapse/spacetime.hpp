#pragma once

// 1+1D spacetime lattice with light speed 1, its causal order, and staircase
// hypersurfaces ("cuts") that absorb one cell at a time.

#include <compare>
#include <cstddef>
#include <vector>

#include "collapse/stochastic.hpp"

namespace collapse::rel {

struct Cell {
    int t;
    int x;

    auto operator<=>(const Cell&) const = default;
};

class SpacetimeLattice {
public:
    SpacetimeLattice(int n_t, int n_x, double a_t = 1.0, double a_x = 1.0);

    int n_t() const { return n_t_; }
    int n_x() const { return n_x_; }
    double a_t() const { return a_t_; }
    double a_x() const { return a_x_; }
    double cell_volume() const { return a_t_ * a_x_; }

    bool contains(Cell c) const { return c.t >= 0 && c.t < n_t_ && c.x >= 0 && c.x < n_x_; }
    std::size_t index(Cell c) const;
    Cell cell(std::size_t index) const;
    std::size_t size() const { return static_cast<std::size_t>(n_t_) * static_cast<std::size_t>(n_x_); }

    /// True when y lies in the closed causal past of x (y == x included).
    bool precedes(Cell y, Cell x) const;

    /// Smallest time lag at which a column offset `dx` enters the light cone.
    int cone_lag(int dx) const;

    /// Cell containing the continuous point (t, x), or an out-of-lattice cell.
    Cell locate(double t, double x) const;

private:
    int n_t_, n_x_;
    double a_t_, a_x_;
    std::vector<int> lag_;
};

enum class Causal { equal, past, future, spacelike };

/// Where y sits relative to x: `past` means y is in the causal past of x.
Causal causal_relation(const SpacetimeLattice& lattice, Cell x, Cell y);

/// A monotone cut: cut[c] is the number of cells already absorbed in column c.
class Hypersurface {
public:
    explicit Hypersurface(const SpacetimeLattice& lattice);

    const std::vector<int>& cut() const { return cut_; }
    bool absorbed(Cell c) const { return c.t < cut_[static_cast<std::size_t>(c.x)]; }
    /// Next unabsorbed cell in its column whose whole causal past is absorbed.
    bool admissible(Cell c) const;
    /// Throws OrderingError when the cell is not admissible.
    void advance(Cell c);
    /// Absorbs all of row t at once; requires the cut to be flat at t.
    void advance_row(int t);
    std::vector<Cell> admissible_cells() const;
    bool complete() const;
    std::size_t absorbed_count() const;
    /// No absorbed cell lies in the causal future of an unabsorbed one.
    bool is_spacelike() const;
    int min_cut() const;

private:
    SpacetimeLattice lattice_;
    std::vector<int> cut_;
};

/// Row by row, left to right. Always admissible.
std::vector<Cell> timeslice_order(const SpacetimeLattice& lattice);

/// Uniformly random admissible cell at every step.
std::vector<Cell> random_admissible_order(const SpacetimeLattice& lattice, RngStream& rng);

}  // namespace collapse::rel

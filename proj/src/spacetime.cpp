#include "collapse/spacetime.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <string>

#include "collapse/errors.hpp"

namespace collapse::rel {

SpacetimeLattice::SpacetimeLattice(int n_t, int n_x, double a_t, double a_x)
    : n_t_(n_t), n_x_(n_x), a_t_(a_t), a_x_(a_x)
{
    if (n_t < 1 || n_x < 1) throw ConfigError("lattice extents must be >= 1");
    if (!(a_t > 0.0) || !(a_x > 0.0)) throw ConfigError("lattice spacings must be > 0");
    lag_.resize(static_cast<std::size_t>(n_x));
    for (int d = 0; d < n_x; ++d) {
        const double ratio = d * a_x_ / a_t_;
        lag_[static_cast<std::size_t>(d)] = static_cast<int>(std::ceil(ratio - 1e-9));
    }
}

std::size_t SpacetimeLattice::index(Cell c) const
{
    if (!contains(c)) throw UsageError("cell (" + std::to_string(c.t) + ", " + std::to_string(c.x) + ") outside the lattice");
    return static_cast<std::size_t>(c.t) * static_cast<std::size_t>(n_x_) + static_cast<std::size_t>(c.x);
}

Cell SpacetimeLattice::cell(std::size_t index) const
{
    if (index >= size()) throw UsageError("cell index out of range");
    return {static_cast<int>(index / static_cast<std::size_t>(n_x_)), static_cast<int>(index % static_cast<std::size_t>(n_x_))};
}

int SpacetimeLattice::cone_lag(int dx) const
{
    const int d = std::abs(dx);
    if (d < n_x_) return lag_[static_cast<std::size_t>(d)];
    return static_cast<int>(std::ceil(d * a_x_ / a_t_ - 1e-9));
}

bool SpacetimeLattice::precedes(Cell y, Cell x) const
{
    const int dt = x.t - y.t;
    return dt >= 0 && cone_lag(x.x - y.x) <= dt;
}

Cell SpacetimeLattice::locate(double t, double x) const
{
    return {static_cast<int>(std::floor(t / a_t_)), static_cast<int>(std::floor(x / a_x_))};
}

Causal causal_relation(const SpacetimeLattice& lattice, Cell x, Cell y)
{
    if (!lattice.contains(x) || !lattice.contains(y)) throw UsageError("causal_relation: cell outside the lattice");
    if (x == y) return Causal::equal;
    if (lattice.precedes(y, x)) return Causal::past;
    if (lattice.precedes(x, y)) return Causal::future;
    return Causal::spacelike;
}

// ---------------------------------------------------------------------------

Hypersurface::Hypersurface(const SpacetimeLattice& lattice)
    : lattice_(lattice), cut_(static_cast<std::size_t>(lattice.n_x()), 0)
{
}

bool Hypersurface::admissible(Cell c) const
{
    if (!lattice_.contains(c)) return false;
    if (cut_[static_cast<std::size_t>(c.x)] != c.t) return false;
    for (int col = 0; col < lattice_.n_x(); ++col) {
        if (col == c.x) continue;
        const int latest = c.t - lattice_.cone_lag(col - c.x);
        if (latest < 0) continue;
        if (cut_[static_cast<std::size_t>(col)] <= latest) return false;
    }
    return true;
}

void Hypersurface::advance(Cell c)
{
    if (!admissible(c))
        throw OrderingError("cell (" + std::to_string(c.t) + ", " + std::to_string(c.x) +
                            ") is not admissible: its causal past is not fully absorbed");
    ++cut_[static_cast<std::size_t>(c.x)];
}

void Hypersurface::advance_row(int t)
{
    for (int& v : cut_) {
        if (v != t) throw OrderingError("row " + std::to_string(t) + " cannot be absorbed: the cut is not flat there");
    }
    for (int& v : cut_) ++v;
}

std::vector<Cell> Hypersurface::admissible_cells() const
{
    std::vector<Cell> out;
    for (int col = 0; col < lattice_.n_x(); ++col) {
        const Cell c{cut_[static_cast<std::size_t>(col)], col};
        if (admissible(c)) out.push_back(c);
    }
    return out;
}

bool Hypersurface::complete() const
{
    return std::all_of(cut_.begin(), cut_.end(), [&](int v) { return v == lattice_.n_t(); });
}

std::size_t Hypersurface::absorbed_count() const
{
    std::size_t n = 0;
    for (int v : cut_) n += static_cast<std::size_t>(v);
    return n;
}

bool Hypersurface::is_spacelike() const
{
    const int n = lattice_.n_x();
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const int unabsorbed = cut_[static_cast<std::size_t>(a)];
            const int absorbed_top = cut_[static_cast<std::size_t>(b)] - 1;
            if (unabsorbed >= lattice_.n_t() || absorbed_top < 0) continue;
            if (absorbed_top - unabsorbed >= lattice_.cone_lag(b - a)) return false;
        }
    }
    return true;
}

int Hypersurface::min_cut() const { return *std::min_element(cut_.begin(), cut_.end()); }

std::vector<Cell> timeslice_order(const SpacetimeLattice& lattice)
{
    std::vector<Cell> order;
    order.reserve(lattice.size());
    for (int t = 0; t < lattice.n_t(); ++t)
        for (int x = 0; x < lattice.n_x(); ++x) order.push_back({t, x});
    return order;
}

std::vector<Cell> random_admissible_order(const SpacetimeLattice& lattice, RngStream& rng)
{
    Hypersurface surface(lattice);
    std::vector<Cell> order;
    order.reserve(lattice.size());
    while (!surface.complete()) {
        const auto options = surface.admissible_cells();
        if (options.empty()) throw OrderingError("no admissible cell on an incomplete cut");
        const Cell next = options[rng.below(options.size())];
        surface.advance(next);
        order.push_back(next);
    }
    return order;
}

}  // namespace collapse::rel

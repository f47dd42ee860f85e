#pragma once

// Causal smearing kernels for the mediating field: f(x, .) lives on the
// causal past of x (and is normalized), g(x, .) on the causal future.

#include <vector>

#include "collapse/spacetime.hpp"

namespace collapse::rel {

enum class KernelProfile { uniform, cone_gaussian };

struct KernelSpec {
    int d_f = 1;  // past window depth in time steps
    int d_g = 1;  // future window depth in time steps
    double g0 = 1.0;
    KernelProfile profile = KernelProfile::uniform;
    double s = 1.0;  // spatial width of cone_gaussian
    /// Negative-control knob: relative f weight placed on same-time cells at
    /// column offsets 1..leak_radius. Zero for every physical kernel.
    double acausal_leak = 0.0;
    int leak_radius = 1;
};

struct KernelEntry {
    Cell cell;
    double weight;
};

class CausalKernelPair {
public:
    CausalKernelPair(const SpacetimeLattice& lattice, const KernelSpec& spec);

    const SpacetimeLattice& lattice() const { return lattice_; }
    const KernelSpec& spec() const { return spec_; }
    bool is_causal() const { return spec_.acausal_leak == 0.0; }

    double f(Cell x, Cell y) const;
    double g(Cell x, Cell y) const;

    std::vector<KernelEntry> f_window(Cell x) const;
    std::vector<KernelEntry> g_window(Cell x) const;

    template <typename Fn>
    void for_each_f(Cell x, Fn&& fn) const
    {
        const double norm = f_norm(x);
        if (norm == 0.0) return;
        for (const auto& o : f_offsets_) {
            const Cell y{x.t + o.dt, x.x + o.dx};
            if (lattice_.contains(y)) fn(y, o.weight / norm);
        }
    }

    template <typename Fn>
    void for_each_g(Cell x, Fn&& fn) const
    {
        for (const auto& o : g_offsets_) {
            const Cell y{x.t + o.dt, x.x + o.dx};
            if (lattice_.contains(y)) fn(y, o.weight);
        }
    }

private:
    struct Offset {
        int dt;
        int dx;
        double weight;
    };

    double f_norm(Cell x) const;
    double profile_weight(int dx) const;

    SpacetimeLattice lattice_;
    KernelSpec spec_;
    std::vector<Offset> f_offsets_;
    std::vector<Offset> g_offsets_;
    // f normalization for rows 0..d_f-1 (clipped in time) and the interior row d_f
    std::vector<std::vector<double>> f_norms_;
};

CausalKernelPair make_kernels(const SpacetimeLattice& lattice, int d_f, int d_g, double g0,
                              KernelProfile profile = KernelProfile::uniform, double s = 1.0);

}  // namespace collapse::rel

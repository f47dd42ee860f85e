#pragma once

// Field-based localization on a periodic 1D lattice of truncated bosonic
// modes. Hits land at Poisson points in spacetime and localize the smeared
// number density N(x) = sum_y g(x - y) n(y).

#include <map>
#include <optional>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/stochastic.hpp"

namespace collapse::fieldloc {

class SmearKernel {
public:
    /// Offsets must be symmetric, weights non-negative with the peak at 0.
    /// Weights are normalized to unit sum.
    explicit SmearKernel(std::map<int, double> weights);

    static SmearKernel delta();
    /// exp(-d^2 / (2 width^2)) for |d| <= radius.
    static SmearKernel gaussian(double width, int radius);

    const std::map<int, double>& weights() const { return weights_; }
    double at(int offset) const;
    int radius() const;

private:
    std::map<int, double> weights_;
};

struct FieldLocConfig {
    int n_sites = 4;
    int n_max = 3;
    SmearKernel kernel = SmearKernel::delta();
    double r = 1.0;
    double mu = 0.0;
    double hopping = 0.0;  // J_hop; 0 disables the Hamiltonian
    double T = 1.0;
    double dt = 0.1;
    std::size_t dimension_cap = std::size_t{1} << 20;

    void validate() const;
};

/// One fock(n_max) factor per site.
SpacePtr make_field_space(int n_sites, int n_max);

/// Diagonal N(x) = sum_y kernel(x - y) n(y) with periodic wrap.
LinearOperator smeared_number_op(int x, const SmearKernel& kernel, const SpacePtr& space);

/// Total particle number operator.
LinearOperator total_number_op(const SpacePtr& space);

/// Multiplies amplitudes by (pi r^2)^(-1/4) exp(-(N(x)_bb - Z)^2 / (2 r^2)).
void apply_field_hit(StateVector& state, const LinearOperator& n_x, double z, double r);

/// Nearest-neighbour periodic hopping -J sum (a_i^dag a_{i+1} + h.c.).
LinearOperator hopping_hamiltonian(const SpacePtr& space, double hopping);

/// Snaps a continuous coordinate to a site: nearest, ties to the lower
/// index, periodic wrap.
int snap_to_site(double x, int n_sites);

/// Basis state with the given occupations.
StateVector occupation_state(const SpacePtr& space, const std::vector<std::size_t>& occupations);

struct FieldHit {
    double t;
    double x;
    int site;
    double z;
    double pre_norm2;
    double post_norm2;
};

struct FieldTrajectory {
    std::vector<FieldHit> hits;
    StateVector final_state;
    double max_leakage = 0.0;
    bool leakage_flag = false;
};

FieldTrajectory run_fieldloc(const FieldLocConfig& config, StateVector initial, RngStream& rng);

}  // namespace collapse::fieldloc

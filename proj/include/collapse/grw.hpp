#pragma once

// Spontaneous localization of distinguishable particles on a 1D grid:
// Schroedinger evolution interrupted, at Poisson times, by Gaussian
// localization of one particle about a sampled centre.

#include <cstddef>
#include <span>
#include <vector>

#include "collapse/hilbert.hpp"
#include "collapse/stochastic.hpp"

namespace collapse::grw {

enum class HamiltonianKind { none, free, harmonic };

struct GrwConfig {
    int n_sites = 128;
    double dx = 0.25;
    int particles = 1;
    HamiltonianKind hamiltonian = HamiltonianKind::none;
    double omega = 1.0;  // harmonic only
    double lambda = 0.0; // hits per particle per unit time
    double r = 1.0;      // localization length
    double T = 1.0;
    double dt = 0.01;
    std::size_t dimension_cap = std::size_t{1} << 22;

    void validate() const;
    /// Coordinate of grid site j; the grid is centred on zero.
    double position(std::size_t j) const;
};

SpacePtr make_grid_space(const GrwConfig& config);

/// Cayley (implicit midpoint) propagator for the hard-wall discrete
/// Hamiltonian, applied particle by particle. Unitary and second order in dt.
class SchrodingerStepper {
public:
    explicit SchrodingerStepper(const GrwConfig& config);

    void step(StateVector& state, double dt) const;

    /// Single-particle Hamiltonian as a dense matrix (diagnostics and tests).
    Eigen::MatrixXd single_particle_hamiltonian() const;

private:
    GrwConfig config_;
    std::vector<double> diag_;
    double offdiag_ = 0.0;
};

StateVector schrodinger_step(const StateVector& state, const GrwConfig& config, double dt);

/// Multiplies by (pi r^2)^(-1/4) exp(-(x_i - z)^2 / (2 r^2)). Unnormalized.
void apply_localization(StateVector& state, const GrwConfig& config, std::size_t particle, double z, double r);

/// Density of the localization centre, <psi|L_i^2(z)|psi> / <psi|psi>.
double center_density(const StateVector& state, const GrwConfig& config, std::size_t particle, double z, double r);

/// Samples a site from the particle's position marginal, then adds Normal(0, r / sqrt 2).
double sample_center(const StateVector& state, const GrwConfig& config, std::size_t particle, double r, RngStream& rng);

std::vector<double> position_marginal(const StateVector& state, std::size_t particle);

/// psi(x) proportional to exp(-(x - center)^2 / (2 sigma^2)), normalized. One particle.
StateVector gaussian_packet(const GrwConfig& config, double center, double sigma);

/// sqrt(1 - w) |left> + sqrt(w) |right> for two Gaussian packets. One particle.
StateVector two_packet_state(const GrwConfig& config, double left, double right, double sigma, double weight_right);

struct GrwHit {
    double time;
    std::size_t particle;
    double z;
    double pre_norm2;
    double post_norm2;
};

struct GrwTrajectory {
    std::vector<GrwHit> hits;
    std::vector<std::pair<double, StateVector>> snapshots;
    StateVector final_state;
};

GrwTrajectory run_grw(const GrwConfig& config, StateVector initial, RngStream& rng,
                      std::span<const double> snapshot_times = {});

}  // namespace collapse::grw

#pragma once

// Gaussian localization operators that are diagonal in the computational
// basis: L(Z) = (pi r^2)^(-1/4) exp(-(D - Z)^2 / (2 r^2)) for a diagonal
// observable D. Shared by the particle, field and relativistic models.

#include <functional>
#include <span>

#include "collapse/hilbert.hpp"
#include "collapse/stochastic.hpp"

namespace collapse {

/// (pi r^2)^(-1/4): amplitude prefactor for scalar localization values.
double localization_prefactor(double r);

/// Multiplies amplitude b by prefactor * exp(-(values[b] - z)^2 / (2 r^2)).
void apply_diagonal_localization(StateVector& state, std::span<const double> values, double z, double r);

/// Groups |amplitude|^2 by the diagonal value. Values closer than `merge_tol`
/// share an entry.
SpectralWeights spectral_weights(const StateVector& state, std::span<const double> values, double merge_tol = 1e-12);

/// Integrates f over z on [lo, hi] with the composite trapezoid rule on
/// `nodes` points. Spectrally accurate for Gaussian integrands that decay at
/// both ends.
double integrate_trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t nodes);

/// E_Z[norm2(L(Z) psi)] - norm2(psi), with the expectation taken by quadrature
/// over Z of the actually-applied operator.
double martingale_defect(const StateVector& state, std::span<const double> values, double r);

}  // namespace collapse

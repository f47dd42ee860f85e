#include "collapse/localization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "collapse/errors.hpp"

namespace collapse {

double localization_prefactor(double r) { return std::pow(std::numbers::pi * r * r, -0.25); }

void apply_diagonal_localization(StateVector& state, std::span<const double> values, double z, double r)
{
    if (values.size() != state.dim()) throw UsageError("localization values do not match state dimension");
    if (!(r > 0.0)) throw ConfigError("localization width r must be > 0");
    const double pre = localization_prefactor(r);
    const double inv = 1.0 / (2.0 * r * r);
    auto& amps = state.amplitudes();
    for (std::size_t b = 0; b < values.size(); ++b) {
        const double d = values[b] - z;
        amps[static_cast<Eigen::Index>(b)] *= pre * std::exp(-d * d * inv);
    }
}

SpectralWeights spectral_weights(const StateVector& state, std::span<const double> values, double merge_tol)
{
    if (values.size() != state.dim()) throw UsageError("spectral values do not match state dimension");
    std::map<double, double> bins;
    const auto& amps = state.amplitudes();
    for (std::size_t b = 0; b < values.size(); ++b) {
        const double p = std::norm(amps[static_cast<Eigen::Index>(b)]);
        if (p == 0.0) continue;
        bins[values[b]] += p;
    }
    SpectralWeights out;
    for (const auto& [v, w] : bins) {
        if (!out.entries.empty() && v - out.entries.back().first <= merge_tol)
            out.entries.back().second += w;
        else
            out.entries.emplace_back(v, w);
    }
    return out;
}

double integrate_trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t nodes)
{
    if (nodes < 2 || !(hi > lo)) throw UsageError("trapezoid rule needs >= 2 nodes on a non-empty interval");
    const double h = (hi - lo) / static_cast<double>(nodes - 1);
    double acc = 0.5 * (f(lo) + f(hi));
    for (std::size_t i = 1; i + 1 < nodes; ++i) acc += f(lo + h * static_cast<double>(i));
    return acc * h;
}

double martingale_defect(const StateVector& state, std::span<const double> values, double r)
{
    if (values.empty()) throw UsageError("martingale_defect needs a non-empty spectrum");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn - 12.0 * r;
    const double hi = *mx + 12.0 * r;
    // Node spacing r/8 keeps the trapezoid error far below 1e-12 for Gaussians of width r/sqrt 2.
    const auto nodes = static_cast<std::size_t>(std::ceil((hi - lo) / (r / 8.0))) + 1;
    const double before = norm2(state);
    const double after = integrate_trapezoid(
        [&](double z) {
            StateVector hit = state;
            apply_diagonal_localization(hit, values, z, r);
            return norm2(hit);
        },
        lo, hi, nodes);
    return after - before;
}

}  // namespace collapse

#include "collapse/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "collapse/errors.hpp"

namespace collapse::rel {

CausalKernelPair::CausalKernelPair(const SpacetimeLattice& lattice, const KernelSpec& spec)
    : lattice_(lattice), spec_(spec)
{
    if (spec_.d_f < 1 || spec_.d_g < 1) throw ConfigError("kernel window depths d_f and d_g must be >= 1 (empty support otherwise)");
    if (!std::isfinite(spec_.g0)) throw ConfigError("g0 must be finite");
    if (spec_.profile == KernelProfile::cone_gaussian && !(spec_.s > 0.0)) throw ConfigError("cone_gaussian width s must be > 0");
    if (spec_.acausal_leak < 0.0 || spec_.leak_radius < 0) throw ConfigError("acausal leak must be >= 0");

    for (int k = 1; k <= spec_.d_f; ++k) {
        for (int dx = -lattice_.n_x() + 1; dx < lattice_.n_x(); ++dx) {
            if (lattice_.cone_lag(dx) > k) continue;
            f_offsets_.push_back({-k, dx, profile_weight(dx)});
        }
    }
    if (spec_.acausal_leak > 0.0) {
        for (int dx = 1; dx <= spec_.leak_radius; ++dx) {
            f_offsets_.push_back({0, -dx, spec_.acausal_leak});
            f_offsets_.push_back({0, dx, spec_.acausal_leak});
        }
    }

    double g_total = 0.0;
    for (int k = 1; k <= spec_.d_g; ++k) {
        for (int dx = -lattice_.n_x() + 1; dx < lattice_.n_x(); ++dx) {
            if (lattice_.cone_lag(dx) > k) continue;
            const double w = profile_weight(dx);
            g_offsets_.push_back({k, dx, w});
            g_total += w;
        }
    }
    if (f_offsets_.empty() || g_offsets_.empty()) throw ConfigError("kernel support window is empty");
    for (auto& o : g_offsets_) o.weight *= spec_.g0 / g_total;

    // Normalization depends on time clipping (rows < d_f) and on the column.
    f_norms_.assign(static_cast<std::size_t>(spec_.d_f) + 1, std::vector<double>(static_cast<std::size_t>(lattice_.n_x()), 0.0));
    for (int row = 0; row <= spec_.d_f; ++row) {
        for (int col = 0; col < lattice_.n_x(); ++col) {
            double sum = 0.0;
            for (const auto& o : f_offsets_) {
                const Cell y{row + o.dt, col + o.dx};
                if (y.t >= 0 && y.x >= 0 && y.x < lattice_.n_x()) sum += o.weight;
            }
            f_norms_[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = sum;
        }
    }
}

double CausalKernelPair::profile_weight(int dx) const
{
    if (spec_.profile == KernelProfile::uniform) return 1.0;
    const double d = dx * lattice_.a_x();
    return std::exp(-d * d / (2.0 * spec_.s * spec_.s));
}

double CausalKernelPair::f_norm(Cell x) const
{
    const auto row = static_cast<std::size_t>(std::min(x.t, spec_.d_f));
    return f_norms_[row][static_cast<std::size_t>(x.x)];
}

double CausalKernelPair::f(Cell x, Cell y) const
{
    if (!lattice_.contains(x) || !lattice_.contains(y)) throw UsageError("kernel evaluated outside the lattice");
    const double norm = f_norm(x);
    if (norm == 0.0) return 0.0;
    for (const auto& o : f_offsets_)
        if (y.t - x.t == o.dt && y.x - x.x == o.dx) return o.weight / norm;
    return 0.0;
}

double CausalKernelPair::g(Cell x, Cell y) const
{
    if (!lattice_.contains(x) || !lattice_.contains(y)) throw UsageError("kernel evaluated outside the lattice");
    for (const auto& o : g_offsets_)
        if (y.t - x.t == o.dt && y.x - x.x == o.dx) return o.weight;
    return 0.0;
}

std::vector<KernelEntry> CausalKernelPair::f_window(Cell x) const
{
    std::vector<KernelEntry> out;
    for_each_f(x, [&](Cell y, double w) { out.push_back({y, w}); });
    return out;
}

std::vector<KernelEntry> CausalKernelPair::g_window(Cell x) const
{
    std::vector<KernelEntry> out;
    for_each_g(x, [&](Cell y, double w) { out.push_back({y, w}); });
    return out;
}

CausalKernelPair make_kernels(const SpacetimeLattice& lattice, int d_f, int d_g, double g0, KernelProfile profile, double s)
{
    KernelSpec spec;
    spec.d_f = d_f;
    spec.d_g = d_g;
    spec.g0 = g0;
    spec.profile = profile;
    spec.s = s;
    return CausalKernelPair(lattice, spec);
}

}  // namespace collapse::rel

#include "collapse/matter.hpp"

#include <cmath>
#include <string>

#include "collapse/errors.hpp"

namespace collapse::rel {

MatterBranchSet::MatterBranchSet(const SpacetimeLattice& lattice, std::vector<std::complex<double>> amplitudes)
    : lattice_(lattice), amps_(std::move(amplitudes)), by_column_(static_cast<std::size_t>(lattice.n_x()))
{
    if (amps_.empty()) throw ConfigError("at least one matter branch is required");
    double total = 0.0;
    for (const auto& c : amps_) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw ConfigError("branch amplitudes must be finite");
        total += std::norm(c);
    }
    if (!(total > 0.0)) throw ConfigError("branch amplitudes are all zero");
    for (auto& c : amps_) c /= std::sqrt(total);
}

std::vector<double> MatterBranchSet::initial_weights() const
{
    std::vector<double> w;
    w.reserve(amps_.size());
    for (const auto& c : amps_) w.push_back(std::norm(c));
    return w;
}

void MatterBranchSet::add_block(std::size_t k, int x0, int x1, double J, int t0, int t1)
{
    if (k >= amps_.size()) throw ConfigError("branch index " + std::to_string(k) + " out of range");
    if (t1 < 0) t1 = lattice_.n_t();
    if (x0 < 0 || x1 > lattice_.n_x() || x0 >= x1) throw ConfigError("source columns must satisfy 0 <= x0 < x1 <= n_x");
    if (t0 < 0 || t1 > lattice_.n_t() || t0 >= t1) throw ConfigError("source rows must satisfy 0 <= t0 < t1 <= n_t");
    if (!(J >= 0.0) || !std::isfinite(J)) throw ConfigError("matter density J must be finite and >= 0");
    blocks_.push_back({k, x0, x1, t0, t1, J});
    for (int x = x0; x < x1; ++x) by_column_[static_cast<std::size_t>(x)].push_back(blocks_.size() - 1);
}

double MatterBranchSet::J(std::size_t k, Cell c) const
{
    if (c.x < 0 || c.x >= lattice_.n_x()) return 0.0;
    double j = 0.0;
    for (auto id : by_column_[static_cast<std::size_t>(c.x)]) {
        const auto& b = blocks_[id];
        if (b.branch == k && c.t >= b.t0 && c.t < b.t1) j += b.J;
    }
    return j;
}

bool MatterBranchSet::any_source(Cell c) const
{
    if (c.x < 0 || c.x >= lattice_.n_x()) return false;
    for (auto id : by_column_[static_cast<std::size_t>(c.x)]) {
        const auto& b = blocks_[id];
        if (c.t >= b.t0 && c.t < b.t1 && b.J > 0.0) return true;
    }
    return false;
}

bool MatterBranchSet::has_column(int x) const
{
    return x >= 0 && x < lattice_.n_x() && !by_column_[static_cast<std::size_t>(x)].empty();
}

int MatterBranchSet::exclusive_columns(std::size_t j, std::size_t k, int t) const
{
    int n = 0;
    for (int x = 0; x < lattice_.n_x(); ++x) {
        const bool a = J(j, {t, x}) > 0.0;
        const bool b = J(k, {t, x}) > 0.0;
        if (a != b) ++n;
    }
    return n;
}

}  // namespace collapse::rel

#include "collapse/rel_branch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "collapse/errors.hpp"

namespace collapse::rel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kOverlapLimit = 1e-4;

double log_sum_exp(const std::vector<double>& v)
{
    double mx = kNegInf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

// Poisson(lambda) pmf over 0..n with the tail beyond n below 1e-15.
std::vector<double> truncated_poisson(double lambda)
{
    std::vector<double> p;
    double term = std::exp(-lambda);
    double cum = 0.0;
    for (std::size_t n = 0;; ++n) {
        if (n > 0) term *= lambda / static_cast<double>(n);
        p.push_back(term);
        cum += term;
        if (static_cast<double>(n) > lambda && 1.0 - cum < 1e-15) break;
        if (n > 100000) throw NumericalError("Poisson enumeration did not converge");
    }
    return p;
}

}  // namespace

std::vector<std::pair<double, double>> enumerate_smeared_poisson(const std::vector<std::pair<double, double>>& f_and_lambda,
                                                                 std::size_t max_atoms)
{
    // keys are values rounded to 1e-9 so equal sums from different paths merge
    std::map<long long, std::pair<double, double>> dist{{0, {0.0, 1.0}}};
    for (const auto& [f, lambda] : f_and_lambda) {
        if (lambda == 0.0 || f == 0.0) continue;
        const auto pmf = truncated_poisson(lambda);
        std::map<long long, std::pair<double, double>> next;
        for (const auto& [key, vp] : dist) {
            for (std::size_t n = 0; n < pmf.size(); ++n) {
                const double value = vp.first + f * static_cast<double>(n);
                auto& slot = next[std::llround(value * 1e9)];
                slot.first = value;
                slot.second += vp.second * pmf[n];
            }
            if (next.size() > max_atoms)
                throw NumericalError("enumerate hit mode exceeded " + std::to_string(max_atoms) +
                                     " distinct N values; use the clt mode");
        }
        dist.swap(next);
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(dist.size());
    for (const auto& [key, vp] : dist) out.push_back(vp);
    return out;
}

BranchTier::BranchTier(const CausalKernelPair& kernels, const MatterBranchSet& matter, HitMode mode)
    : kernels_(kernels), matter_(matter), mode_(mode), surface_(kernels.lattice())
{
    for (const auto& c : matter_.amplitudes()) log_w_.push_back(std::norm(c) > 0.0 ? std::log(std::norm(c)) : kNegInf);
    dist2_.assign(log_w_.size() * log_w_.size(), 0.0);
    const auto& lat = kernels_.lattice();
    for (int x = 0; x < lat.n_x(); ++x)
        if (matter_.has_column(x)) source_columns_.push_back(x);
}

BranchTier::Row* BranchTier::row(int t)
{
    if (t < first_row_) throw UsageError("mediating amplitudes of row " + std::to_string(t) + " were already evicted");
    const std::size_t width = static_cast<std::size_t>(kernels_.lattice().n_x()) * log_w_.size();
    while (static_cast<int>(rows_.size()) <= t - first_row_) rows_.emplace_back(width, cplx{});
    return &rows_[static_cast<std::size_t>(t - first_row_)];
}

const BranchTier::Row* BranchTier::row(int t) const
{
    if (t < first_row_ || t - first_row_ >= static_cast<int>(rows_.size())) return nullptr;
    return &rows_[static_cast<std::size_t>(t - first_row_)];
}

cplx BranchTier::alpha(std::size_t k, Cell y) const
{
    const Row* r = row(y.t);
    if (r == nullptr) return {};
    return (*r)[static_cast<std::size_t>(y.x) * log_w_.size() + k];
}

void BranchTier::displace(Cell x)
{
    const std::size_t K = log_w_.size();
    std::vector<double> j(K);
    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
        j[k] = matter_.J(k, x);
        any = any || j[k] != 0.0;
    }
    if (!any) return;
    const double dv = kernels_.lattice().cell_volume();
    kernels_.for_each_g(x, [&](Cell y, double g) {
        cplx* a = row(y.t)->data() + static_cast<std::size_t>(y.x) * K;
        for (std::size_t p = 0; p < K; ++p)
            for (std::size_t q = p + 1; q < K; ++q) dist2_[pair_index(p, q)] -= std::norm(a[p] - a[q]);
        for (std::size_t k = 0; k < K; ++k) a[k] += cplx(0.0, -j[k] * g * dv);
        for (std::size_t p = 0; p < K; ++p)
            for (std::size_t q = p + 1; q < K; ++q) dist2_[pair_index(p, q)] += std::norm(a[p] - a[q]);
    });
}

void BranchTier::evict(int min_row)
{
    // hits in the last absorbed row still read d_f rows behind it
    const int keep_from = min_row - 1 - kernels_.spec().d_f;
    while (first_row_ < keep_from && !rows_.empty()) {
        rows_.pop_front();
        ++first_row_;
    }
    if (rows_.empty()) first_row_ = std::max(first_row_, keep_from);
}

void BranchTier::tomonaga_step(Cell x)
{
    surface_.advance(x);
    displace(x);
    evict(surface_.min_cut());
}

void BranchTier::tomonaga_row(int t)
{
    surface_.advance_row(t);
    for (int x : source_columns_) displace({t, x});
    evict(t + 1);
}

BranchNDistribution BranchTier::n_distribution(std::size_t k, Cell x) const
{
    BranchNDistribution d;
    std::vector<std::pair<double, double>> terms;
    kernels_.for_each_f(x, [&](Cell y, double f) {
        const double lambda = std::norm(alpha(k, y));
        d.mean += f * lambda;
        d.var += f * f * lambda;
        if (lambda > 0.0) terms.emplace_back(f, lambda);
    });
    if (mode_ == HitMode::enumerate) d.atoms = enumerate_smeared_poisson(terms);
    return d;
}

namespace {

double log_density(const BranchNDistribution& d, HitMode mode, double z, double r)
{
    if (mode == HitMode::clt) {
        const double s2 = d.var + 0.5 * r * r;
        const double e = z - d.mean;
        return -0.5 * std::log(2.0 * std::numbers::pi * s2) - e * e / (2.0 * s2);
    }
    std::vector<double> terms;
    terms.reserve(d.atoms.size());
    for (const auto& [n, p] : d.atoms) {
        if (p <= 0.0) continue;
        const double e = n - z;
        terms.push_back(std::log(p) - e * e / (r * r));
    }
    return log_sum_exp(terms) - 0.5 * std::log(std::numbers::pi * r * r);
}

}  // namespace

double BranchTier::log_branch_density(std::size_t k, Cell x, double z, double r) const
{
    if (!(r > 0.0)) throw ConfigError("localization width r must be > 0");
    return log_density(n_distribution(k, x), mode_, z, r);
}

double BranchTier::branch_density(std::size_t k, Cell x, double z, double r) const
{
    return std::exp(log_branch_density(k, x, z, r));
}

std::vector<double> BranchTier::weights() const
{
    const double total = log_sum_exp(log_w_);
    if (total == kNegInf) throw DegenerateStateError("all branch weights vanished");
    std::vector<double> w;
    w.reserve(log_w_.size());
    for (double lw : log_w_) w.push_back(std::exp(lw - total));
    return w;
}

double BranchTier::sample_z(Cell x, double r, RngStream& rng) const
{
    if (!(r > 0.0)) throw ConfigError("localization width r must be > 0");
    const std::size_t k = sample_index(weights(), rng);
    const auto d = n_distribution(k, x);
    if (mode_ == HitMode::clt) return rng.normal(d.mean, std::sqrt(d.var + 0.5 * r * r));
    std::vector<double> p;
    p.reserve(d.atoms.size());
    for (const auto& a : d.atoms) p.push_back(a.second);
    const double n = d.atoms[sample_index(p, rng)].first;
    return n + rng.normal(0.0, r / std::numbers::sqrt2);
}

std::pair<double, double> BranchTier::apply_hit(Cell x, double z, double r)
{
    const std::size_t K = log_w_.size();
    std::vector<double> means(K, 0.0);
    std::vector<double> next(K, kNegInf);
    for (std::size_t k = 0; k < K; ++k) {
        if (log_w_[k] == kNegInf) continue;
        const auto d = n_distribution(k, x);
        means[k] = d.mean;
        next[k] = log_w_[k] + log_density(d, mode_, z, r);
    }
    if (K > 1 && overlap() > kOverlapLimit) {
        bool differ = false;
        for (std::size_t p = 0; p < K; ++p)
            for (std::size_t q = p + 1; q < K; ++q)
                if (log_w_[p] != kNegInf && log_w_[q] != kNegInf && std::abs(means[p] - means[q]) > 1e-12) differ = true;
        if (differ) ++coherent_hits_;
    }
    const double before = log_sum_exp(log_w_);
    const double after = log_sum_exp(next);
    if (after == kNegInf || !std::isfinite(after)) throw DegenerateStateError("all branch weights vanished after a hit");
    for (std::size_t k = 0; k < K; ++k) log_w_[k] = next[k] - after;
    return {1.0, std::exp(after - before)};
}

double BranchTier::overlap() const
{
    const std::size_t K = log_w_.size();
    double worst = 0.0;
    for (std::size_t p = 0; p < K; ++p) {
        if (log_w_[p] == kNegInf) continue;
        for (std::size_t q = p + 1; q < K; ++q) {
            if (log_w_[q] == kNegInf) continue;
            worst = std::max(worst, std::exp(-0.5 * dist2_[pair_index(p, q)]));
        }
    }
    return worst;
}

}  // namespace collapse::rel

#include "collapse/rel_exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/localization.hpp"

namespace collapse::rel {

namespace {

std::string cell_name(Cell c) { return "(" + std::to_string(c.t) + ", " + std::to_string(c.x) + ")"; }

std::vector<Factor> mode_factors(std::size_t modes, int n_max, std::size_t branches)
{
    std::vector<Factor> f;
    f.reserve(modes + 1);
    f.push_back(Factor::reg(static_cast<int>(branches)));
    for (std::size_t i = 0; i < modes; ++i) f.push_back(Factor::fock(n_max));
    return f;
}

}  // namespace

ModeMap::ModeMap(std::vector<Cell> cells, int n_max, std::size_t branches)
    : cells_(std::move(cells)), n_max_(n_max), branches_(branches)
{
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    for (std::size_t i = 0; i < cells_.size(); ++i) factor_[cells_[i]] = i + 1;
    space_ = make_space(mode_factors(cells_.size(), n_max_, branches_));
}

std::optional<std::size_t> ModeMap::factor_of(Cell c) const
{
    const auto it = factor_.find(c);
    if (it == factor_.end()) return std::nullopt;
    return it->second;
}

std::size_t ModeMap::require(Cell c) const
{
    const auto f = factor_of(c);
    if (!f) throw ConfigError("kernel window cell " + cell_name(c) + " is outside the represented mode window");
    return *f;
}

std::size_t ModeMap::dimension(std::size_t modes, int n_max, std::size_t branches)
{
    const std::size_t limit = std::numeric_limits<std::size_t>::max();
    std::size_t d = branches;
    const auto per = static_cast<std::size_t>(n_max) + 1;
    for (std::size_t i = 0; i < modes; ++i) {
        if (d > limit / per) return limit;
        d *= per;
    }
    return d;
}

std::vector<Cell> excitable_cells(const CausalKernelPair& kernels, const MatterBranchSet& matter)
{
    std::set<Cell> cells;
    const auto& lat = kernels.lattice();
    for (int t = 0; t < lat.n_t(); ++t) {
        for (int x = 0; x < lat.n_x(); ++x) {
            if (!matter.any_source({t, x})) continue;
            kernels.for_each_g({t, x}, [&](Cell y, double w) {
                if (w != 0.0) cells.insert(y);
            });
        }
    }
    return {cells.begin(), cells.end()};
}

LinearOperator smeared_N(Cell x, const CausalKernelPair& kernels, const ModeMap& modes)
{
    const auto& space = modes.space();
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->dim()));
    kernels.for_each_f(x, [&](Cell y, double w) {
        const std::size_t f = modes.require(y);
        for (std::size_t b = 0; b < space->dim(); ++b)
            diag[static_cast<Eigen::Index>(b)] += w * static_cast<double>(space->digit(b, f));
    });
    return LinearOperator::diagonal(space, std::move(diag));
}

namespace {

// sum_y c(y) (s_raise a^dag(y) + s_lower a(y)) as a dense matrix
Eigen::MatrixXcd weighted_ladders(const std::vector<std::pair<std::size_t, double>>& terms, const HilbertSpace& space,
                                  cplx s_raise, cplx s_lower)
{
    const auto d = static_cast<Eigen::Index>(space.dim());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (const auto& [f, c] : terms) {
        const std::size_t stride = space.stride(f);
        const auto n_max = static_cast<std::size_t>(space.factor(f).size);
        for (std::size_t b = 0; b < space.dim(); ++b) {
            const std::size_t n = space.digit(b, f);
            const auto col = static_cast<Eigen::Index>(b);
            if (n < n_max) m(static_cast<Eigen::Index>(b + stride), col) += s_raise * c * std::sqrt(static_cast<double>(n + 1));
            if (n > 0) m(static_cast<Eigen::Index>(b - stride), col) += s_lower * c * std::sqrt(static_cast<double>(n));
        }
    }
    return m;
}

}  // namespace

LinearOperator smeared_A(Cell x, const CausalKernelPair& kernels, const ModeMap& modes)
{
    std::vector<std::pair<std::size_t, double>> terms;
    kernels.for_each_g(x, [&](Cell y, double w) { terms.emplace_back(modes.require(y), w); });
    return LinearOperator::dense(modes.space(), weighted_ladders(terms, *modes.space(), 1.0, 1.0));
}

LinearOperator interaction_generator(Cell x, const CausalKernelPair& kernels, const ModeMap& modes,
                                     const MatterBranchSet& matter)
{
    if (matter.size() != modes.branches()) throw UsageError("mode map register does not match the branch count");
    Eigen::MatrixXcd a = smeared_A(x, kernels, modes).to_dense();
    const auto& space = *modes.space();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double jk = matter.J(space.digit(static_cast<std::size_t>(j), 0), x);
        a.col(j) *= jk;
    }
    return LinearOperator::dense(modes.space(), std::move(a));
}

LinearOperator number_field_commutator(Cell x, Cell x_prime, const CausalKernelPair& kernels, const ModeMap& modes)
{
    std::vector<std::pair<std::size_t, double>> terms;
    kernels.for_each_f(x, [&](Cell y, double fw) {
        const double gw = kernels.g(x_prime, y);
        if (gw != 0.0) terms.emplace_back(modes.require(y), fw * gw);
    });
    return LinearOperator::dense(modes.space(), weighted_ladders(terms, *modes.space(), 1.0, -1.0));
}

// ---------------------------------------------------------------------------

ExactTier::ExactTier(const CausalKernelPair& kernels, const MatterBranchSet& matter, int n_max, std::size_t dimension_cap)
    : kernels_(kernels),
      matter_(matter),
      modes_([&] {
          const auto cells = excitable_cells(kernels, matter);
          const std::size_t dim = ModeMap::dimension(cells.size(), n_max, matter.size());
          if (dim > dimension_cap)
              throw ConfigError("exact tier dimension " + std::to_string(dim) + " (" + std::to_string(matter.size()) +
                                " branches x " + std::to_string(n_max + 1) + "^" + std::to_string(cells.size()) +
                                " modes) exceeds dimension_cap " + std::to_string(dimension_cap));
          return ModeMap(cells, n_max, matter.size());
      }()),
      state_(StateVector::zero(modes_.space())),
      surface_(kernels.lattice())
{
    // vacuum in every mode, amplitude c_k on branch k
    const auto& space = *modes_.space();
    for (std::size_t k = 0; k < matter_.size(); ++k) state_[k * space.stride(0)] = matter_.amplitudes()[k];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(field_quadrature(n_max));
    x_values_ = solver.eigenvalues();
    x_vectors_ = solver.eigenvectors();
}

void ExactTier::tomonaga_step(Cell x)
{
    surface_.advance(x);
    const double dv = kernels_.lattice().cell_volume();
    for (std::size_t k = 0; k < matter_.size(); ++k) {
        const double jk = matter_.J(k, x);
        if (jk == 0.0) continue;
        kernels_.for_each_g(x, [&](Cell y, double w) {
            const double theta = dv * jk * w;
            Eigen::VectorXcd phase(x_values_.size());
            for (Eigen::Index i = 0; i < x_values_.size(); ++i) phase[i] = std::exp(cplx(0.0, -theta * x_values_[i]));
            const Eigen::MatrixXcd u = x_vectors_ * phase.asDiagonal() * x_vectors_.adjoint();
            const std::size_t f = modes_.require(y);
            if (matter_.size() == 1)
                apply_on_factor(state_, f, u);
            else
                apply_on_factor(state_, f, u, 0, k);
        });
    }
}

std::vector<double> ExactTier::n_values(Cell x) const
{
    const auto& space = *modes_.space();
    std::vector<double> values(space.dim(), 0.0);
    kernels_.for_each_f(x, [&](Cell y, double w) {
        const auto f = modes_.factor_of(y);
        if (!f) return;
        for (std::size_t b = 0; b < space.dim(); ++b) values[b] += w * static_cast<double>(space.digit(b, *f));
    });
    return values;
}

double ExactTier::sample_z(Cell x, double r, RngStream& rng) const
{
    const auto values = n_values(x);
    const auto weights = spectral_weights(state_, values, 1e-9);
    if (!(weights.total() > 0.0)) throw DegenerateStateError("exact-tier state has zero norm");
    return sample_Z(weights, r, rng);
}

double ExactTier::z_density(Cell x, double z, double r) const
{
    const auto values = n_values(x);
    return collapse::z_density(spectral_weights(state_, values, 1e-9), z, r);
}

ExactHit ExactTier::apply_hit(Cell x, double z, double r)
{
    const auto values = n_values(x);
    ExactHit h{};
    h.pre_norm2 = norm2(state_);
    apply_diagonal_localization(state_, values, z, r);
    h.post_norm2 = norm2(state_);
    if (!(h.post_norm2 > 0.0) || !std::isfinite(h.post_norm2))
        throw DegenerateStateError("exact-tier state vanished after a hit");
    state_.normalize();
    return h;
}

std::vector<double> ExactTier::branch_populations() const
{
    auto p = factor_marginal(state_, 0);
    double total = 0.0;
    for (double v : p) total += v;
    for (double& v : p) v /= total;
    return p;
}

double ExactTier::mean_occupation(Cell y) const
{
    const auto f = modes_.factor_of(y);
    if (!f) return 0.0;
    const auto p = factor_marginal(state_, *f);
    double total = 0.0, mean = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        total += p[n];
        mean += static_cast<double>(n) * p[n];
    }
    return mean / total;
}

double ExactTier::leakage() const { return max_top_level_probability(state_); }

}  // namespace collapse::rel

#include "collapse/fieldloc.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "collapse/errors.hpp"
#include "collapse/localization.hpp"

namespace collapse::fieldloc {

SmearKernel::SmearKernel(std::map<int, double> weights) : weights_(std::move(weights))
{
    if (weights_.empty()) throw ConfigError("smear kernel needs at least one weight");
    double total = 0.0;
    for (const auto& [off, w] : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("smear kernel weights must be finite and >= 0");
        auto mirror = weights_.find(-off);
        if (mirror == weights_.end() || std::abs(mirror->second - w) > 1e-14 * std::max(1.0, w))
            throw ConfigError("smear kernel must be symmetric under offset negation");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("smear kernel weights sum to zero");
    for (auto& [off, w] : weights_) w /= total;
    const double peak = at(0);
    for (const auto& [off, w] : weights_)
        if (w > peak) throw ConfigError("smear kernel must peak at zero offset");
}

SmearKernel SmearKernel::delta() { return SmearKernel({{0, 1.0}}); }

SmearKernel SmearKernel::gaussian(double width, int radius)
{
    if (!(width > 0.0) || radius < 0) throw ConfigError("gaussian kernel needs width > 0 and radius >= 0");
    std::map<int, double> w;
    for (int d = -radius; d <= radius; ++d) w[d] = std::exp(-0.5 * d * d / (width * width));
    return SmearKernel(std::move(w));
}

double SmearKernel::at(int offset) const
{
    auto it = weights_.find(offset);
    return it == weights_.end() ? 0.0 : it->second;
}

int SmearKernel::radius() const { return weights_.rbegin()->first; }

void FieldLocConfig::validate() const
{
    if (n_sites < 2) throw ConfigError("n_sites must be >= 2");
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    if (!(r > 0.0)) throw ConfigError("r must be > 0");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be >= 0");
    if (!(T > 0.0)) throw ConfigError("T must be > 0");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (2 * kernel.radius() + 1 > n_sites) throw ConfigError("kernel support does not fit the periodic lattice");
    const double dim = std::pow(static_cast<double>(n_max + 1), n_sites);
    if (dim > static_cast<double>(dimension_cap))
        throw ConfigError("field space dimension (n_max+1)^n_sites = " + std::to_string(dim) + " exceeds cap " +
                          std::to_string(dimension_cap));
}

SpacePtr make_field_space(int n_sites, int n_max)
{
    return make_space(std::vector<Factor>(static_cast<std::size_t>(n_sites), Factor::fock(n_max)));
}

namespace {

int wrap(int i, int n) { return ((i % n) + n) % n; }

}  // namespace

LinearOperator smeared_number_op(int x, const SmearKernel& kernel, const SpacePtr& space)
{
    const int n = static_cast<int>(space->num_factors());
    if (x < 0 || x >= n) throw UsageError("site out of range");
    if (2 * kernel.radius() + 1 > n) throw ConfigError("kernel support does not fit the periodic lattice");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->dim()));
    for (const auto& [off, w] : kernel.weights()) {
        // g(x - y) with y = x - off
        const auto y = static_cast<std::size_t>(wrap(x - off, n));
        if (space->factor(y).kind != FactorKind::fock) throw UsageError("field space factors must be fock modes");
        for (std::size_t b = 0; b < space->dim(); ++b)
            diag[static_cast<Eigen::Index>(b)] += w * static_cast<double>(space->digit(b, y));
    }
    return LinearOperator::diagonal(space, std::move(diag));
}

LinearOperator total_number_op(const SpacePtr& space)
{
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->dim()));
    for (std::size_t f = 0; f < space->num_factors(); ++f)
        for (std::size_t b = 0; b < space->dim(); ++b) diag[static_cast<Eigen::Index>(b)] += static_cast<double>(space->digit(b, f));
    return LinearOperator::diagonal(space, std::move(diag));
}

void apply_field_hit(StateVector& state, const LinearOperator& n_x, double z, double r)
{
    const auto& d = n_x.diagonal_entries();
    apply_diagonal_localization(state, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())), z, r);
}

LinearOperator hopping_hamiltonian(const SpacePtr& space, double hopping)
{
    const std::size_t n = space->num_factors();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(space->dim()), static_cast<Eigen::Index>(space->dim()));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        if (i == j) continue;
        const auto term = ladder(space, i, Ladder::raise) * ladder(space, j, Ladder::lower);
        const Eigen::MatrixXcd t = term.to_dense();
        h -= hopping * (t + t.adjoint());
    }
    return LinearOperator::dense(space, std::move(h));
}

int snap_to_site(double x, int n_sites)
{
    // nearest integer, ties (x = k + 1/2) go to k
    const int k = static_cast<int>(std::ceil(x - 0.5));
    return wrap(k, n_sites);
}

StateVector occupation_state(const SpacePtr& space, const std::vector<std::size_t>& occupations)
{
    return StateVector::basis(space, space->index(occupations));
}

FieldTrajectory run_fieldloc(const FieldLocConfig& config, StateVector initial, RngStream& rng)
{
    config.validate();
    const auto& space = initial.space();
    if (space->num_factors() != static_cast<std::size_t>(config.n_sites))
        throw UsageError("initial state does not match the configured lattice");

    // Spectral form of the hopping Hamiltonian, so any partial step is exact.
    std::optional<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>> spectrum;
    if (config.hopping != 0.0) {
        spectrum.emplace(hopping_hamiltonian(space, config.hopping).to_dense());
        if (spectrum->info() != Eigen::Success) throw NumericalError("hopping Hamiltonian diagonalization failed");
    }
    auto evolve = [&](StateVector& psi, double dt) {
        if (!spectrum || dt <= 0.0) return;
        const auto& v = spectrum->eigenvectors();
        Eigen::VectorXcd c = v.adjoint() * psi.amplitudes();
        for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= std::exp(cplx(0.0, -dt * spectrum->eigenvalues()[i]));
        psi.amplitudes() = v * c;
    };

    std::vector<LinearOperator> n_ops;
    n_ops.reserve(static_cast<std::size_t>(config.n_sites));
    for (int x = 0; x < config.n_sites; ++x) n_ops.push_back(smeared_number_op(x, config.kernel, space));

    FieldTrajectory traj{{}, std::move(initial), 0.0, false};
    StateVector& psi = traj.final_state;
    auto monitor = [&]() {
        traj.max_leakage = std::max(traj.max_leakage, max_top_level_probability(psi));
        traj.leakage_flag = traj.max_leakage > kLeakageLimit;
    };
    monitor();

    std::vector<SpacetimePoint> points;
    if (config.mu > 0.0) {
        const Region slab{0.0, config.T, -0.5, static_cast<double>(config.n_sites) - 0.5};
        points = sprinkle(slab, config.mu, rng).points;
    }

    double now = 0.0;
    auto evolve_to = [&](double target) {
        while (now + config.dt <= target) {
            evolve(psi, config.dt);
            now += config.dt;
        }
        if (target - now > 1e-14) evolve(psi, target - now);
        now = target;
        monitor();
    };

    for (const auto& p : points) {
        evolve_to(p.t);
        FieldHit hit{p.t, p.x, snap_to_site(p.x, config.n_sites), 0.0, norm2(psi), 0.0};
        const auto& n_x = n_ops[static_cast<std::size_t>(hit.site)];
        const auto& diag = n_x.diagonal_entries();
        const std::span<const double> values(diag.data(), static_cast<std::size_t>(diag.size()));
        hit.z = sample_Z(spectral_weights(psi, values), config.r, rng);
        apply_field_hit(psi, n_x, hit.z, config.r);
        hit.post_norm2 = norm2(psi);
        psi.normalize();
        traj.hits.push_back(hit);
    }
    evolve_to(config.T);
    return traj;
}

}  // namespace collapse::fieldloc

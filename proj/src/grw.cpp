#include "collapse/grw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/localization.hpp"

namespace collapse::grw {

void GrwConfig::validate() const
{
    if (n_sites < 2) throw ConfigError("n_sites must be >= 2");
    if (!(dx > 0.0)) throw ConfigError("dx must be > 0");
    if (particles < 1) throw ConfigError("particle count M must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(r > 0.0)) throw ConfigError("r must be > 0");
    if (!(T > 0.0)) throw ConfigError("T must be > 0");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (hamiltonian == HamiltonianKind::harmonic && !(omega > 0.0)) throw ConfigError("omega must be > 0");
    double dim = 1.0;
    for (int i = 0; i < particles; ++i) dim *= n_sites;
    if (dim > static_cast<double>(dimension_cap))
        throw ConfigError("grid dimension n_sites^M = " + std::to_string(dim) + " exceeds cap " + std::to_string(dimension_cap));
}

double GrwConfig::position(std::size_t j) const
{
    return (static_cast<double>(j) - 0.5 * static_cast<double>(n_sites - 1)) * dx;
}

SpacePtr make_grid_space(const GrwConfig& config)
{
    config.validate();
    return make_space(std::vector<Factor>(static_cast<std::size_t>(config.particles), Factor::grid(config.n_sites)));
}

// ---------------------------------------------------------------------------

SchrodingerStepper::SchrodingerStepper(const GrwConfig& config) : config_(config)
{
    config_.validate();
    const auto n = static_cast<std::size_t>(config_.n_sites);
    diag_.assign(n, 0.0);
    if (config_.hamiltonian == HamiltonianKind::none) return;
    // H = -(1/2) d^2/dx^2 (+ omega^2 x^2 / 2), three-point Laplacian, hard walls.
    const double kinetic = 1.0 / (config_.dx * config_.dx);
    offdiag_ = -0.5 * kinetic;
    for (std::size_t j = 0; j < n; ++j) {
        diag_[j] = kinetic;
        if (config_.hamiltonian == HamiltonianKind::harmonic) {
            const double x = config_.position(j);
            diag_[j] += 0.5 * config_.omega * config_.omega * x * x;
        }
    }
}

Eigen::MatrixXd SchrodingerStepper::single_particle_hamiltonian() const
{
    const auto n = static_cast<Eigen::Index>(diag_.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        h(j, j) = diag_[static_cast<std::size_t>(j)];
        if (j + 1 < n) h(j, j + 1) = h(j + 1, j) = offdiag_;
    }
    return h;
}

void SchrodingerStepper::step(StateVector& state, double dt) const
{
    if (config_.hamiltonian == HamiltonianKind::none || dt == 0.0) return;
    const auto& space = *state.space();
    if (space.num_factors() != static_cast<std::size_t>(config_.particles))
        throw UsageError("state does not live on the configured grid^M space");
    const std::size_t n = diag_.size();
    const cplx half(0.0, 0.5 * dt);

    // Thomas factorization of (I + i dt/2 H), shared by every line.
    const cplx off = half * offdiag_;
    std::vector<cplx> cprime(n), denom(n);
    denom[0] = 1.0 + half * diag_[0];
    cprime[0] = off / denom[0];
    for (std::size_t j = 1; j < n; ++j) {
        denom[j] = 1.0 + half * diag_[j] - off * cprime[j - 1];
        cprime[j] = off / denom[j];
    }

    auto& amps = state.amplitudes();
    std::vector<cplx> line(n), rhs(n);
    for (std::size_t p = 0; p < space.num_factors(); ++p) {
        const std::size_t stride = space.stride(p);
        const std::size_t block = n * stride;
        for (std::size_t hi = 0; hi < space.dim(); hi += block) {
            for (std::size_t lo = 0; lo < stride; ++lo) {
                const std::size_t base = hi + lo;
                for (std::size_t j = 0; j < n; ++j) line[j] = amps[static_cast<Eigen::Index>(base + j * stride)];
                for (std::size_t j = 0; j < n; ++j) {
                    cplx hpsi = diag_[j] * line[j];
                    if (j > 0) hpsi += offdiag_ * line[j - 1];
                    if (j + 1 < n) hpsi += offdiag_ * line[j + 1];
                    rhs[j] = line[j] - half * hpsi;
                }
                // forward sweep, back substitution
                rhs[0] /= denom[0];
                for (std::size_t j = 1; j < n; ++j) rhs[j] = (rhs[j] - off * rhs[j - 1]) / denom[j];
                for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= cprime[j] * rhs[j + 1];
                for (std::size_t j = 0; j < n; ++j) amps[static_cast<Eigen::Index>(base + j * stride)] = rhs[j];
            }
        }
    }
}

StateVector schrodinger_step(const StateVector& state, const GrwConfig& config, double dt)
{
    StateVector out = state;
    SchrodingerStepper(config).step(out, dt);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_particle(const StateVector& state, std::size_t particle)
{
    if (particle >= state.space()->num_factors()) throw UsageError("particle index out of range");
}

}  // namespace

void apply_localization(StateVector& state, const GrwConfig& config, std::size_t particle, double z, double r)
{
    require_particle(state, particle);
    if (!(r > 0.0)) throw ConfigError("r must be > 0");
    const auto& space = *state.space();
    const std::size_t n = space.factor_dim(particle);
    std::vector<double> factor(n);
    const double pre = localization_prefactor(r);
    for (std::size_t j = 0; j < n; ++j) {
        const double d = config.position(j) - z;
        factor[j] = pre * std::exp(-d * d / (2.0 * r * r));
    }
    auto& amps = state.amplitudes();
    for (std::size_t b = 0; b < space.dim(); ++b) amps[static_cast<Eigen::Index>(b)] *= factor[space.digit(b, particle)];
}

std::vector<double> position_marginal(const StateVector& state, std::size_t particle)
{
    require_particle(state, particle);
    return factor_marginal(state, particle);
}

double center_density(const StateVector& state, const GrwConfig& config, std::size_t particle, double z, double r)
{
    const auto p = position_marginal(state, particle);
    double total = 0.0, acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = config.position(j) - z;
        acc += p[j] * std::exp(-d * d / (r * r));
        total += p[j];
    }
    if (!(total > 0.0)) throw DegenerateStateError("zero-norm state has no centre density");
    return gaussian_normalization(r) * acc / total;
}

double sample_center(const StateVector& state, const GrwConfig& config, std::size_t particle, double r, RngStream& rng)
{
    if (!(norm2(state) > 0.0)) throw DegenerateStateError("cannot sample a localization centre from a zero-norm state");
    const auto p = position_marginal(state, particle);
    const std::size_t site = sample_index(p, rng);
    return config.position(site) + rng.normal(0.0, r / std::numbers::sqrt2);
}

StateVector gaussian_packet(const GrwConfig& config, double center, double sigma)
{
    if (config.particles != 1) throw UsageError("gaussian_packet builds single-particle states");
    auto space = make_grid_space(config);
    auto psi = StateVector::zero(space);
    for (std::size_t j = 0; j < space->dim(); ++j) {
        const double d = config.position(j) - center;
        psi[j] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    psi.normalize();
    return psi;
}

StateVector two_packet_state(const GrwConfig& config, double left, double right, double sigma, double weight_right)
{
    if (weight_right < 0.0 || weight_right > 1.0) throw ConfigError("packet weight must lie in [0, 1]");
    const auto l = gaussian_packet(config, left, sigma);
    const auto r = gaussian_packet(config, right, sigma);
    StateVector psi(l.space(), std::sqrt(1.0 - weight_right) * l.amplitudes() + std::sqrt(weight_right) * r.amplitudes());
    psi.normalize();
    return psi;
}

// ---------------------------------------------------------------------------

GrwTrajectory run_grw(const GrwConfig& config, StateVector initial, RngStream& rng, std::span<const double> snapshot_times)
{
    config.validate();
    if (initial.space()->num_factors() != static_cast<std::size_t>(config.particles))
        throw UsageError("initial state does not match the configured particle count");
    const SchrodingerStepper stepper(config);

    struct Event {
        double time;
        std::size_t particle;  // npos marks a snapshot
    };
    constexpr std::size_t kSnapshot = static_cast<std::size_t>(-1);
    std::vector<Event> events;
    for (std::size_t i = 0; i < static_cast<std::size_t>(config.particles); ++i)
        for (double t : poisson_times(config.lambda, config.T, rng)) events.push_back({t, i});
    for (double t : snapshot_times) {
        if (t < 0.0 || t > config.T) throw ConfigError("snapshot time outside [0, T]");
        events.push_back({t, kSnapshot});
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });

    GrwTrajectory traj{{}, {}, initial};
    StateVector& psi = traj.final_state;
    double now = 0.0;
    auto evolve_to = [&](double target) {
        if (config.hamiltonian == HamiltonianKind::none) {
            now = target;
            return;
        }
        while (now + config.dt <= target) {
            stepper.step(psi, config.dt);
            now += config.dt;
        }
        if (target - now > 1e-14) stepper.step(psi, target - now);
        now = target;
    };

    for (const auto& ev : events) {
        evolve_to(ev.time);
        if (ev.particle == kSnapshot) {
            traj.snapshots.emplace_back(ev.time, psi);
            continue;
        }
        GrwHit hit{ev.time, ev.particle, 0.0, norm2(psi), 0.0};
        hit.z = sample_center(psi, config, ev.particle, config.r, rng);
        apply_localization(psi, config, ev.particle, hit.z, config.r);
        hit.post_norm2 = norm2(psi);
        psi.normalize();
        traj.hits.push_back(hit);
    }
    evolve_to(config.T);
    return traj;
}

}  // namespace collapse::grw

#pragma once

// Seedable randomness: a counter-based generator keyed by (master seed,
// stream id), Poisson processes in time and in spacetime volume, and exact
// sampling of localization values Z.

#include <array>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace collapse {

/// Philox4x32-10 counter-based generator. Each (master_seed, stream_id) pair
/// names an independent, reproducible stream; the draw counter is the only
/// state. Satisfies UniformRandomBitGenerator.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    /// Number of 64-bit words drawn so far.
    std::uint64_t counter() const { return drawn_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal(double mean, double stddev);
    double exponential(double rate);
    std::uint64_t poisson(double mean);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    /// Independent stream derived from this one's key, e.g. for a sub-task.
    RngStream derive(std::uint64_t salt) const;

private:
    void refill();

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    std::uint64_t drawn_ = 0;
};

/// Exponential gaps of mean 1/rate on (0, horizon); empty when rate == 0.
std::vector<double> poisson_times(double rate, double horizon, RngStream& rng);

struct SpacetimePoint {
    double t;
    double x;
};

/// Axis-aligned rectangle in (t, x).
struct Region {
    double t0, t1, x0, x1;
    double area() const { return (t1 - t0) * (x1 - x0); }
};

struct Sprinkling {
    Region region;
    double density;
    /// Sorted by t, ties by x.
    std::vector<SpacetimePoint> points;
};

/// N ~ Poisson(density * area), then N points uniform over the region.
Sprinkling sprinkle(const Region& region, double density, RngStream& rng);

/// Distribution of a diagonal observable in a state: (eigenvalue, weight) pairs.
struct SpectralWeights {
    std::vector<std::pair<double, double>> entries;

    double total() const;
};

/// (pi r^2)^(-1/2): normalization of exp(-(n - Z)^2 / r^2) over scalar Z.
double gaussian_normalization(double r);

/// Density of Z: sum_n w_n c exp(-(n - Z)^2 / r^2) / sum_n w_n.
double z_density(const SpectralWeights& weights, double z, double r);

/// Picks eigenvalue n with probability w_n / sum w, then n + Normal(0, r / sqrt 2).
double sample_Z(const SpectralWeights& weights, double r, RngStream& rng);

/// Picks an index with probability proportional to the (non-negative) weights.
std::size_t sample_index(const std::vector<double>& weights, RngStream& rng);

}  // namespace collapse

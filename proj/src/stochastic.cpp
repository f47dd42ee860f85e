#include "collapse/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "collapse/errors.hpp"

namespace collapse {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key)
{
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

// SplitMix64 finalizer, used only to derive child keys.
std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id)
{
}

void RngStream::refill()
{
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(master_seed_),
                                              static_cast<std::uint32_t>(master_seed_ >> 32)};
    const auto out = philox4x32_10(ctr, key);
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
    ++block_;
}

RngStream::result_type RngStream::operator()()
{
    if (buffered_ == 0) refill();
    ++drawn_;
    return buffer_[2 - buffered_--];
}

double RngStream::uniform()
{
    // 53 random bits, shifted off zero
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev)
{
    boost::random::normal_distribution<double> dist(mean, stddev);
    return dist(*this);
}

double RngStream::exponential(double rate)
{
    boost::random::exponential_distribution<double> dist(rate);
    return dist(*this);
}

std::uint64_t RngStream::poisson(double mean)
{
    if (mean <= 0.0) return 0;
    boost::random::poisson_distribution<std::uint64_t, double> dist(mean);
    return dist(*this);
}

std::uint64_t RngStream::below(std::uint64_t n)
{
    if (n == 0) throw UsageError("below(0) has no valid outcome");
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = max() - max() % n;
    for (;;) {
        const std::uint64_t v = (*this)();
        if (v < limit) return v % n;
    }
}

RngStream RngStream::derive(std::uint64_t salt) const
{
    return RngStream(mix64(master_seed_ ^ mix64(salt)), mix64(stream_id_ + 0x632BE59BD9B4E019ull * (salt + 1)));
}

// ---------------------------------------------------------------------------

std::vector<double> poisson_times(double rate, double horizon, RngStream& rng)
{
    if (!std::isfinite(rate) || !std::isfinite(horizon)) throw ConfigError("poisson_times: rate and horizon must be finite");
    if (rate < 0.0) throw ConfigError("poisson_times: rate must be >= 0, got " + std::to_string(rate));
    if (!(horizon > 0.0)) throw ConfigError("poisson_times: horizon must be > 0");
    std::vector<double> times;
    if (rate == 0.0) return times;
    double t = rng.exponential(rate);
    while (t < horizon) {
        times.push_back(t);
        t += rng.exponential(rate);
    }
    return times;
}

Sprinkling sprinkle(const Region& region, double density, RngStream& rng)
{
    if (!std::isfinite(density) || density < 0.0)
        throw ConfigError("sprinkle: density mu must be >= 0, got " + std::to_string(density));
    if (!(region.area() > 0.0) || region.t1 <= region.t0 || region.x1 <= region.x0)
        throw ConfigError("sprinkle: region must have positive area");
    Sprinkling s{region, density, {}};
    const std::uint64_t n = rng.poisson(density * region.area());
    s.points.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const double t = region.t0 + (region.t1 - region.t0) * rng.uniform();
        const double x = region.x0 + (region.x1 - region.x0) * rng.uniform();
        s.points.push_back({t, x});
    }
    std::sort(s.points.begin(), s.points.end(), [](const SpacetimePoint& a, const SpacetimePoint& b) {
        return a.t < b.t || (a.t == b.t && a.x < b.x);
    });
    return s;
}

// ---------------------------------------------------------------------------

double SpectralWeights::total() const
{
    double s = 0.0;
    for (const auto& [value, w] : entries) s += w;
    return s;
}

double gaussian_normalization(double r) { return 1.0 / std::sqrt(std::numbers::pi * r * r); }

double z_density(const SpectralWeights& weights, double z, double r)
{
    const double total = weights.total();
    if (!(total > 0.0)) throw DegenerateStateError("spectral weights sum to zero");
    double acc = 0.0;
    for (const auto& [n, w] : weights.entries) {
        const double d = n - z;
        acc += w * std::exp(-d * d / (r * r));
    }
    return gaussian_normalization(r) * acc / total;
}

std::size_t sample_index(const std::vector<double>& weights, RngStream& rng)
{
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("sampling weights must be finite and non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw DegenerateStateError("all sampling weights are zero");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) last_positive = i;
        acc += weights[i];
        if (u < acc && weights[i] > 0.0) return i;
    }
    return last_positive;
}

double sample_Z(const SpectralWeights& weights, double r, RngStream& rng)
{
    if (!(r > 0.0)) throw ConfigError("localization width r must be > 0");
    if (weights.entries.empty()) throw DegenerateStateError("no spectral weights to sample from");
    std::vector<double> w;
    w.reserve(weights.entries.size());
    for (const auto& e : weights.entries) w.push_back(e.second);
    const std::size_t k = sample_index(w, rng);
    return weights.entries[k].first + rng.normal(0.0, r / std::numbers::sqrt2);
}

}  // namespace collapse

#include "collapse/relmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "collapse/errors.hpp"

namespace collapse::rel {

void RelConfig::validate() const
{
    if (n_t < 1) throw ConfigError("n_t >= 1 required");
    if (n_x < 1) throw ConfigError("n_x >= 1 required");
    if (!(a_t > 0.0)) throw ConfigError("a_t > 0 required");
    if (!(a_x > 0.0)) throw ConfigError("a_x > 0 required");
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu >= 0 required");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("r > 0 required");
    if (amplitudes.empty()) throw ConfigError("at least one branch amplitude required");
    for (const auto& s : sources) {
        if (s.branch >= amplitudes.size()) throw ConfigError("source branch index out of range");
        if (s.x0 < 0 || s.x1 > n_x || s.x0 >= s.x1) throw ConfigError("source columns must satisfy 0 <= x0 < x1 <= n_x");
        if (!(s.J >= 0.0)) throw ConfigError("source J >= 0 required");
    }
    if (n_max < 1) throw ConfigError("n_max >= 1 required");
    for (const auto& c : hit_columns)
        if (c.x0 < 0 || c.x1 > n_x || c.x0 >= c.x1) throw ConfigError("hit column ranges must satisfy 0 <= x0 < x1 <= n_x");
    if (hit_t0 < 0 || (hit_t1 >= 0 && hit_t1 < hit_t0)) throw ConfigError("hit rows must satisfy 0 <= t0 <= t1");
    if (!(threshold > 0.5 && threshold <= 1.0)) throw ConfigError("threshold in (0.5, 1] required");
    if (tier == Tier::exact && exact_dimension() > dimension_cap)
        throw ConfigError("exact tier dimension " + std::to_string(exact_dimension()) + " exceeds dimension_cap " +
                          std::to_string(dimension_cap));
}

SpacetimeLattice RelConfig::lattice() const { return SpacetimeLattice(n_t, n_x, a_t, a_x); }

CausalKernelPair RelConfig::kernels() const { return CausalKernelPair(lattice(), kernel); }

MatterBranchSet RelConfig::matter() const
{
    MatterBranchSet m(lattice(), amplitudes);
    for (const auto& s : sources) m.add_block(s.branch, s.x0, s.x1, s.J, s.t0, s.t1);
    return m;
}

std::size_t RelConfig::exact_dimension() const
{
    const auto cells = excitable_cells(kernels(), matter());
    return ModeMap::dimension(cells.size(), n_max, amplitudes.size());
}

std::vector<PlannedHit> sprinkle_row(const RelConfig& config, int t, std::size_t first_index, RngStream& rng)
{
    std::vector<PlannedHit> out;
    const int t_end = config.hit_t1 < 0 ? config.n_t : config.hit_t1;
    if (t < config.hit_t0 || t >= t_end || config.mu == 0.0) return out;
    std::vector<ColumnRange> ranges = config.hit_columns;
    if (ranges.empty()) ranges.push_back({0, config.n_x});
    for (const auto& c : ranges) {
        const Region region{t * config.a_t, (t + 1) * config.a_t, c.x0 * config.a_x, c.x1 * config.a_x};
        for (const auto& p : sprinkle(region, config.mu, rng).points) {
            // floor can land on the upper edge through rounding; keep the cell inside the range
            const int x = std::clamp(static_cast<int>(std::floor(p.x / config.a_x)), c.x0, c.x1 - 1);
            out.push_back({0, {t, x}, p.t, p.x});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const PlannedHit& a, const PlannedHit& b) {
        return a.t < b.t || (a.t == b.t && a.x < b.x);
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].index = first_index + i;
    return out;
}

namespace {

constexpr std::uint64_t kSprinkleSalt = 0x5350524e4bULL;
constexpr std::uint64_t kZSalt = 0x5a44524157ULL;

// Common face of the two tiers for the sweep loop.
class TierDriver {
public:
    virtual ~TierDriver() = default;
    virtual void step(Cell x) = 0;
    virtual void step_row(int t) = 0;
    virtual double sample_z(Cell x, double r, RngStream& rng) = 0;
    virtual std::pair<double, double> hit(Cell x, double z, double r) = 0;
    virtual std::vector<double> weights() const = 0;
    virtual double leakage() const { return 0.0; }
    virtual void finish(TrajectoryRecord&, bool) const {}
};

class ExactDriver final : public TierDriver {
public:
    ExactDriver(const RelConfig& c) : tier_(c.kernels(), c.matter(), c.n_max, c.dimension_cap), n_x_(c.n_x) {}
    void step(Cell x) override { tier_.tomonaga_step(x); }
    void step_row(int t) override
    {
        for (int x = 0; x < n_x_; ++x) tier_.tomonaga_step({t, x});
    }
    double sample_z(Cell x, double r, RngStream& rng) override { return tier_.sample_z(x, r, rng); }
    std::pair<double, double> hit(Cell x, double z, double r) override
    {
        const auto h = tier_.apply_hit(x, z, r);
        return {h.pre_norm2, h.post_norm2};
    }
    std::vector<double> weights() const override { return tier_.branch_populations(); }
    double leakage() const override { return tier_.leakage(); }
    void finish(TrajectoryRecord& rec, bool keep) const override
    {
        if (keep) rec.final_state = tier_.state();
    }

private:
    ExactTier tier_;
    int n_x_;
};

class BranchDriver final : public TierDriver {
public:
    BranchDriver(const RelConfig& c) : tier_(c.kernels(), c.matter(), c.hit_mode) {}
    void step(Cell x) override { tier_.tomonaga_step(x); }
    void step_row(int t) override { tier_.tomonaga_row(t); }
    double sample_z(Cell x, double r, RngStream& rng) override { return tier_.sample_z(x, r, rng); }
    std::pair<double, double> hit(Cell x, double z, double r) override { return tier_.apply_hit(x, z, r); }
    std::vector<double> weights() const override { return tier_.weights(); }
    void finish(TrajectoryRecord& rec, bool) const override
    {
        rec.final_overlap = tier_.overlap();
        rec.coherent_hits = tier_.coherent_hits();
    }

private:
    BranchTier tier_;
};

std::size_t argmax(const std::vector<double>& w)
{
    return static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
}

}  // namespace

TrajectoryRecord run_relativistic(const RelConfig& config, RngStream& rng, const RunControls& controls)
{
    config.validate();
    std::unique_ptr<TierDriver> driver;
    if (config.tier == Tier::exact)
        driver = std::make_unique<ExactDriver>(config);
    else
        driver = std::make_unique<BranchDriver>(config);

    RngStream sprinkle_rng = rng.derive(kSprinkleSalt);
    RngStream z_rng = rng.derive(kZSalt);

    TrajectoryRecord rec;
    rec.tier = config.tier;
    rec.level = config.record;
    rec.threshold = config.threshold;
    rec.initial_weights = driver->weights();
    if (*std::max_element(rec.initial_weights.begin(), rec.initial_weights.end()) >= config.threshold) {
        rec.tau = 0.0;
        rec.outcome = argmax(rec.initial_weights);
    }
    rec.max_leakage = driver->leakage();

    bool stop = false;
    auto process = [&](const PlannedHit& p) {
        RelHitRecord h{p.index, p.cell, p.t, p.x, 0.0, 0.0, 0.0, {}};
        if (controls.replay_z) {
            if (p.index >= controls.replay_z->size()) throw UsageError("replay list has no Z for hit " + std::to_string(p.index));
            h.z = (*controls.replay_z)[p.index];
        } else {
            h.z = driver->sample_z(p.cell, config.r, z_rng);
        }
        std::tie(h.pre_norm2, h.post_norm2) = driver->hit(p.cell, h.z, config.r);
        h.weights = driver->weights();
        ++rec.hit_count;
        rec.log_norm_ratio += std::log(h.post_norm2 / h.pre_norm2);
        if (config.tier == Tier::exact) rec.max_leakage = std::max(rec.max_leakage, driver->leakage());
        if (!rec.tau && *std::max_element(h.weights.begin(), h.weights.end()) >= config.threshold) {
            rec.tau = h.t;
            rec.outcome = argmax(h.weights);
        }
        if (controls.on_hit && controls.on_hit(h)) stop = true;
        if (config.stop_on_reduction && rec.tau) stop = true;
        if (config.record == RecordLevel::full) rec.hits.push_back(std::move(h));
    };

    if (controls.order) {
        // every row is sprinkled up front so the points do not depend on the order
        std::map<Cell, std::vector<PlannedHit>> by_cell;
        std::size_t next_index = 0;
        for (int t = 0; t < config.n_t; ++t) {
            auto row = sprinkle_row(config, t, next_index, sprinkle_rng);
            next_index += row.size();
            for (auto& p : row) by_cell[p.cell].push_back(p);
        }
        if (controls.order->size() > config.lattice().size()) throw OrderingError("sweep order longer than the lattice");
        for (const Cell& c : *controls.order) {
            driver->step(c);
            rec.rows_swept = std::max(rec.rows_swept, c.t + 1);
            const auto it = by_cell.find(c);
            if (it == by_cell.end()) continue;
            for (const auto& p : it->second) {
                process(p);
                if (stop) break;
            }
            if (stop) break;
        }
    } else {
        std::size_t next_index = 0;
        for (int t = 0; t < config.n_t && !stop; ++t) {
            driver->step_row(t);
            rec.rows_swept = t + 1;
            const auto row = sprinkle_row(config, t, next_index, sprinkle_rng);
            next_index += row.size();
            for (const auto& p : row) {
                process(p);
                if (stop) break;
            }
        }
    }
    rec.stopped_early = stop;
    rec.final_weights = driver->weights();
    if (config.tier == Tier::exact) rec.max_leakage = std::max(rec.max_leakage, driver->leakage());
    rec.leakage_flag = rec.max_leakage > kLeakageLimit;
    driver->finish(rec, controls.keep_final_state);
    return rec;
}

double joint_probability(const TrajectoryRecord& record)
{
    if (record.tier != Tier::exact) throw UsageError("joint_probability needs an exact-tier record");
    if (record.hits.size() != record.hit_count) throw UsageError("record does not carry the per-hit norms");
    double p = 1.0;
    for (const auto& h : record.hits) p *= h.post_norm2 / h.pre_norm2;
    return p;
}

std::optional<double> reduction_time(const TrajectoryRecord& record, double threshold)
{
    if (!record.initial_weights.empty() &&
        *std::max_element(record.initial_weights.begin(), record.initial_weights.end()) >= threshold)
        return 0.0;
    if (record.hits.size() != record.hit_count) {
        if (threshold == record.threshold) return record.tau;
        throw UsageError("outcome-level record only knows the reduction time at its own threshold");
    }
    for (const auto& h : record.hits)
        if (*std::max_element(h.weights.begin(), h.weights.end()) >= threshold) return h.t;
    return std::nullopt;
}

}  // namespace collapse::rel

#pragma once

// Relativistic collapse on a 1+1D lattice: the cut sweeps the lattice cell by
// cell, applying the local interaction factor of each absorbed cell and a
// localization hit for every sprinkled point inside it.

#include <functional>
#include <optional>
#include <vector>

#include "collapse/kernels.hpp"
#include "collapse/matter.hpp"
#include "collapse/rel_branch.hpp"
#include "collapse/rel_exact.hpp"
#include "collapse/spacetime.hpp"
#include "collapse/stochastic.hpp"

namespace collapse::rel {

enum class Tier { exact, branch };
enum class RecordLevel { full, outcome };

struct SourceBlock {
    std::size_t branch = 0;
    int x0 = 0, x1 = 1;
    double J = 0.0;
    int t0 = 0, t1 = -1;  // t1 < 0: up to the last row
};

struct ColumnRange {
    int x0, x1;
};

struct RelConfig {
    int n_t = 8;
    int n_x = 8;
    double a_t = 1.0;
    double a_x = 1.0;
    KernelSpec kernel;
    std::vector<cplx> amplitudes{cplx(1.0)};
    std::vector<SourceBlock> sources;
    double mu = 0.0;  // hits per unit spacetime volume
    double r = 1.0;
    Tier tier = Tier::branch;
    HitMode hit_mode = HitMode::clt;
    int n_max = 4;  // exact tier truncation
    std::size_t dimension_cap = std::size_t{1} << 22;
    std::vector<ColumnRange> hit_columns;  // empty: every column
    int hit_t0 = 0, hit_t1 = -1;           // rows that receive hits
    double threshold = 0.99;
    bool stop_on_reduction = false;
    RecordLevel record = RecordLevel::full;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    SpacetimeLattice lattice() const;
    CausalKernelPair kernels() const;
    MatterBranchSet matter() const;
    /// State dimension the exact tier would need.
    std::size_t exact_dimension() const;
};

struct PlannedHit {
    std::size_t index;  // position in the whole sprinkling, ordered by row then time
    Cell cell;
    double t, x;
};

/// Poisson points of density mu in row t, restricted to the hit columns,
/// sorted by time. `first_index` numbers them.
std::vector<PlannedHit> sprinkle_row(const RelConfig& config, int t, std::size_t first_index, RngStream& rng);

struct RelHitRecord {
    std::size_t index;
    Cell cell;
    double t, x;
    double z;
    double pre_norm2;
    double post_norm2;
    std::vector<double> weights;  // normalized branch weights after the hit
};

struct TrajectoryRecord {
    Tier tier = Tier::branch;
    RecordLevel level = RecordLevel::full;
    std::vector<double> initial_weights;
    std::vector<RelHitRecord> hits;  // full level only
    std::size_t hit_count = 0;
    double log_norm_ratio = 0.0;  // sum of log(post / pre) over hits
    std::vector<double> final_weights;
    double threshold = 0.99;
    std::optional<double> tau;          // first time max weight >= threshold
    std::optional<std::size_t> outcome; // dominant branch at tau
    int rows_swept = 0;
    bool stopped_early = false;
    double max_leakage = 0.0;
    bool leakage_flag = false;
    double final_overlap = 0.0;
    std::size_t coherent_hits = 0;
    std::optional<StateVector> final_state;  // exact tier, on request
};

struct RunControls {
    /// Custom admissible sweep (exact tier); default is row by row.
    std::optional<std::vector<Cell>> order;
    /// Z for hit i is replay_z[i] instead of a fresh draw.
    std::optional<std::vector<double>> replay_z;
    /// Called after every hit; returning true stops the sweep.
    std::function<bool(const RelHitRecord&)> on_hit;
    bool keep_final_state = false;
};

TrajectoryRecord run_relativistic(const RelConfig& config, RngStream& rng, const RunControls& controls = {});

/// Product of post/pre norm ratios over all hits: the joint density of the
/// realized Z values. Exact tier, full record.
double joint_probability(const TrajectoryRecord& record);

/// First hit time at which max_k w_k >= threshold; 0 when the start already
/// qualifies; nullopt if never.
std::optional<double> reduction_time(const TrajectoryRecord& record, double threshold = 0.99);

}  // namespace collapse::rel

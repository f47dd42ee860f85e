#pragma once

// Seeded experiments. Each is a pure function of (normalized config, master
// seed): trials run on independent RNG streams and are collected in trial
// order, so the worker count never changes the output.

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include "collapse/relmodel.hpp"
#include "collapse/run_config.hpp"

namespace collapse {

using CsvValue = std::variant<std::int64_t, double, std::string>;

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<CsvValue>> rows;
};

/// One declared tolerance and whether the measured value met it.
struct Check {
    std::string name;
    double value;
    std::string rule;
    bool passed;
};

struct ExperimentResult {
    std::string name;
    std::string config_digest;
    std::uint64_t master_seed = 0;
    json config;  // normalized, without execution-only keys
    CsvTable table;
    json summary = json::object();
    std::vector<Check> checks;

    bool passed() const;
    const Check* check(const std::string& name) const;
};

/// Runs the experiment named in a normalized config.
ExperimentResult run_experiment(const json& normalized, std::size_t workers = 1);

/// CSV: '#'-prefixed header block (experiment, digest, seed), then a column
/// row and one row per trial. Reals use 17 significant digits.
std::string format_csv(const ExperimentResult& result);
std::string format_json(const ExperimentResult& result);
/// Writes <out_dir>/<name>.csv and <out_dir>/<name>.json.
void write_outputs(const ExperimentResult& result, const std::string& out_dir);

/// fn(i) for i in [0, n) on up to `workers` threads; results in index order.
template <typename Fn>
auto parallel_trials(std::size_t n, std::size_t workers, Fn&& fn)
{
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<std::optional<R>> slots(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// diagnostics that back the acceptance suite

struct MicrocausalityReport {
    std::size_t spacelike_pairs = 0;
    double max_spacelike_na = 0.0;         // max ||[N(x), A(x')]|| over spacelike pairs
    double max_spacelike_generator = 0.0;  // same with the interaction generator
    std::size_t timelike_overlapping_pairs = 0;
    double max_timelike_na = 0.0;
    double max_closed_form_error = 0.0;    // vs sum_y f g (a^dag - a)
};

/// Every ordered cell pair of an n_t x n_x lattice, modes over the union of
/// the two kernel windows.
MicrocausalityReport check_microcausality(int n_t, int n_x, int n_max, const rel::KernelSpec& kernel);

struct TierEquivalenceReport {
    std::size_t hits = 0;
    double max_abs_difference = 0.0;
    double overlap = 0.0;  // inter-branch mediating overlap once sources are done
    double exact_leakage = 0.0;
    std::vector<std::vector<double>> exact_weights;   // per hit
    std::vector<std::vector<double>> branch_weights;  // per hit
};

/// Two branches on an n_x = 4, n_t = 3 lattice: branch 0 sources the whole
/// first row with amplitude J, branch 1 is vacuum; hits land in the last row.
rel::RelConfig tier_equivalence_instance(double J, double r, double mu, int n_max);

/// Runs the exact tier with sampled Z, replays those Z through the branch
/// tier (enumerate mode) and compares normalized weights after every hit.
TierEquivalenceReport check_tier_equivalence(const rel::RelConfig& exact_config, std::uint64_t seed);

}  // namespace collapse

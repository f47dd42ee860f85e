#include "collapse/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

#include "collapse/errors.hpp"
#include "collapse/fieldloc.hpp"
#include "collapse/grw.hpp"
#include "collapse/localization.hpp"
#include "collapse/stats.hpp"

namespace collapse {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Check make_check(std::string name, double value, std::string rule, bool passed)
{
    return {std::move(name), value, std::move(rule), passed};
}

Check within(std::string name, double value, double target, double tol)
{
    const bool ok = std::abs(value - target) <= tol;
    return make_check(std::move(name), value, "|value - " + fmt(target) + "| <= " + fmt(tol), ok);
}

Check below(std::string name, double value, double limit)
{
    return make_check(std::move(name), value, "value < " + fmt(limit), value < limit);
}

Check above(std::string name, double value, double limit)
{
    return make_check(std::move(name), value, "value > " + fmt(limit), value > limit);
}

std::uint64_t stream_id(std::uint64_t group, std::uint64_t index) { return (group << 32) | index; }

// ---------------------------------------------------------------------------
// model construction from normalized sub-objects

struct GrwSetup {
    grw::GrwConfig config;
    double left, right, sigma, threshold;
};

GrwSetup grw_setup(const json& g)
{
    GrwSetup s{};
    const double r = g.at("r").get<double>();
    const double half = 0.5 * g.at("separation").get<double>() * r;
    const double extent = half + g.at("wall").get<double>() * r;
    auto& c = s.config;
    c.r = r;
    c.dx = g.at("dx").get<double>() * r;
    c.n_sites = 2 * static_cast<int>(std::ceil(extent / c.dx)) + 1;
    c.particles = 1;
    const auto h = g.at("hamiltonian").get<std::string>();
    c.hamiltonian = h == "free" ? grw::HamiltonianKind::free
                   : h == "harmonic" ? grw::HamiltonianKind::harmonic
                                     : grw::HamiltonianKind::none;
    c.omega = g.at("omega").get<double>();
    c.lambda = g.at("lambda").get<double>();
    c.T = g.at("T").get<double>();
    c.dt = g.at("dt").get<double>();
    s.left = -half;
    s.right = half;
    s.sigma = g.at("sigma").get<double>() * r;
    s.threshold = g.at("reduce_threshold").get<double>();
    c.validate();
    return s;
}

double right_probability(const StateVector& psi, const grw::GrwConfig& c)
{
    const auto p = grw::position_marginal(psi, 0);
    double total = 0.0, right = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        total += p[j];
        if (c.position(j) > 0.0) right += p[j];
    }
    return right / total;
}

struct FieldSetup {
    fieldloc::FieldLocConfig config;
    int site_a, site_b;
    double threshold;
};

FieldSetup field_setup(const json& f)
{
    FieldSetup s{};
    auto& c = s.config;
    c.n_sites = f.at("n_sites").get<int>();
    c.n_max = f.at("n_max").get<int>();
    c.r = f.at("r").get<double>();
    c.mu = f.at("mu").get<double>();
    c.T = f.at("T").get<double>();
    c.hopping = f.at("hopping").get<double>();
    c.dt = f.at("dt").get<double>();
    const double width = f.at("kernel_width").get<double>();
    c.kernel = width > 0.0 ? fieldloc::SmearKernel::gaussian(width, f.at("kernel_radius").get<int>())
                           : fieldloc::SmearKernel::delta();
    s.site_a = f.at("sites")[0].get<int>();
    s.site_b = f.at("sites")[1].get<int>();
    if (s.site_a >= c.n_sites || s.site_b >= c.n_sites || s.site_a == s.site_b)
        throw ConfigError("fieldloc.sites: two distinct sites below n_sites required");
    s.threshold = f.at("reduce_threshold").get<double>();
    c.validate();
    return s;
}

StateVector one_particle_superposition(const SpacePtr& space, int n_sites, int a, int b, double weight_b)
{
    std::vector<std::size_t> occ(static_cast<std::size_t>(n_sites), 0);
    occ[static_cast<std::size_t>(a)] = 1;
    StateVector sa = fieldloc::occupation_state(space, occ);
    occ[static_cast<std::size_t>(a)] = 0;
    occ[static_cast<std::size_t>(b)] = 1;
    StateVector sb = fieldloc::occupation_state(space, occ);
    Eigen::VectorXcd amps = std::sqrt(1.0 - weight_b) * sa.amplitudes() + std::sqrt(weight_b) * sb.amplitudes();
    return StateVector(space, std::move(amps));
}

double site_occupation(const StateVector& psi, int site)
{
    const auto p = factor_marginal(psi, static_cast<std::size_t>(site));
    double total = 0.0, mean = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        total += p[n];
        mean += static_cast<double>(n) * p[n];
    }
    return mean / total;
}

// ---------------------------------------------------------------------------
// born

ExperimentResult exp_born(const json& c, std::size_t workers)
{
    ExperimentResult res;
    const auto model = c.at("model").get<std::string>();
    const double w = c.at("weight").get<double>();
    const auto trials = c.at("trials").get<std::size_t>();
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const double k = c.at("sigma_k").get<double>();

    struct Trial {
        std::int64_t outcome;  // 1: second packet / site / branch, 0: first, -1: unreduced
        double p_second;
        std::int64_t hits;
    };
    std::vector<Trial> out;

    if (model == "grw") {
        const auto s = grw_setup(c.at("grw"));
        const StateVector init = grw::two_packet_state(s.config, s.left, s.right, s.sigma, w);
        out = parallel_trials(trials, workers, [&](std::size_t i) {
            RngStream rng(seed, i);
            const auto traj = grw::run_grw(s.config, init, rng);
            const double p = right_probability(traj.final_state, s.config);
            const std::int64_t o = p >= s.threshold ? 1 : (p <= 1.0 - s.threshold ? 0 : -1);
            return Trial{o, p, static_cast<std::int64_t>(traj.hits.size())};
        });
    } else if (model == "fieldloc") {
        const auto s = field_setup(c.at("fieldloc"));
        const auto space = fieldloc::make_field_space(s.config.n_sites, s.config.n_max);
        const StateVector init = one_particle_superposition(space, s.config.n_sites, s.site_a, s.site_b, w);
        out = parallel_trials(trials, workers, [&](std::size_t i) {
            RngStream rng(seed, i);
            const auto traj = fieldloc::run_fieldloc(s.config, init, rng);
            const double p = site_occupation(traj.final_state, s.site_b);
            const std::int64_t o = p >= s.threshold ? 1 : (p <= 1.0 - s.threshold ? 0 : -1);
            return Trial{o, p, static_cast<std::int64_t>(traj.hits.size())};
        });
    } else {
        auto rc = rel_config_from_json(c.at("rel"));
        rc.amplitudes = {cplx(std::sqrt(1.0 - w)), cplx(std::sqrt(w))};
        rc.stop_on_reduction = true;
        rc.record = rel::RecordLevel::outcome;
        out = parallel_trials(trials, workers, [&](std::size_t i) {
            RngStream rng(seed, i);
            const auto rec = rel::run_relativistic(rc, rng);
            const std::int64_t o = rec.outcome ? static_cast<std::int64_t>(*rec.outcome) : -1;
            return Trial{o, rec.final_weights.at(1), static_cast<std::int64_t>(rec.hit_count)};
        });
    }

    res.table.columns = {"trial", "outcome", "p_second", "hits"};
    std::size_t second = 0, reduced = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        res.table.rows.push_back({static_cast<std::int64_t>(i), out[i].outcome, out[i].p_second, out[i].hits});
        if (out[i].outcome >= 0) ++reduced;
        if (out[i].outcome == 1) ++second;
    }
    const double freq = reduced ? static_cast<double>(second) / static_cast<double>(reduced) : kNaN;
    const double sigma = stats::binomial_sigma(w, reduced);
    const double unreduced_fraction = static_cast<double>(trials - reduced) / static_cast<double>(trials);
    res.summary = {{"model", model},
                   {"weight", w},
                   {"trials", trials},
                   {"reduced", reduced},
                   {"unreduced", trials - reduced},
                   {"frequency", freq},
                   {"binomial_sigma", sigma},
                   {"ci_low", freq - k * sigma},
                   {"ci_high", freq + k * sigma}};
    res.checks.push_back(within("frequency", freq, w, k * sigma));
    res.checks.push_back(make_check("unreduced_fraction", unreduced_fraction, "value <= 0.01", unreduced_fraction <= 0.01));
    return res;
}

// ---------------------------------------------------------------------------
// martingale

StateVector random_state(const SpacePtr& space, RngStream& rng)
{
    Eigen::VectorXcd a(static_cast<Eigen::Index>(space->dim()));
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = cplx(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0));
    StateVector s(space, std::move(a));
    s.normalize();
    return s;
}

ExperimentResult exp_martingale(const json& c, std::size_t)
{
    ExperimentResult res;
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const double tol = c.at("tolerance").get<double>();
    const int n_random = c.at("random_states").get<int>();
    res.table.columns = {"model", "case", "location", "pre_norm2", "expected_post_norm2", "deviation"};
    std::map<std::string, double> worst;

    auto record = [&](const std::string& model, const std::string& kase, std::int64_t loc, const StateVector& psi,
                      std::span<const double> values, double r) {
        const double pre = norm2(psi);
        const double defect = martingale_defect(psi, values, r);
        res.table.rows.push_back({model, kase, loc, pre, pre + defect, defect});
        worst[model] = std::max(worst[model], std::abs(defect));
    };

    for (const auto& m : c.at("models")) {
        const auto model = m.get<std::string>();
        RngStream rng(seed, stream_id(1 + static_cast<std::uint64_t>(&m - &c.at("models")[0]), 0));
        if (model == "grw") {
            const auto s = grw_setup(c.at("grw"));
            std::vector<double> pos(static_cast<std::size_t>(s.config.n_sites));
            for (std::size_t j = 0; j < pos.size(); ++j) pos[j] = s.config.position(j);
            record(model, "two_packet", 0, grw::two_packet_state(s.config, s.left, s.right, s.sigma, 0.5), pos, s.config.r);
            record(model, "packet", 0, grw::gaussian_packet(s.config, 0.0, s.sigma), pos, s.config.r);
            const auto space = grw::make_grid_space(s.config);
            for (int i = 0; i < n_random; ++i) record(model, "random", i, random_state(space, rng), pos, s.config.r);
        } else if (model == "fieldloc") {
            const auto s = field_setup(c.at("fieldloc"));
            const auto space = fieldloc::make_field_space(s.config.n_sites, s.config.n_max);
            const StateVector vac = StateVector::basis(space, 0);
            for (int x = 0; x < s.config.n_sites; ++x) {
                const auto op = fieldloc::smeared_number_op(x, s.config.kernel, space);
                const auto& d = op.diagonal_entries();
                const std::span<const double> values(d.data(), static_cast<std::size_t>(d.size()));
                record(model, "vacuum", x, vac, values, s.config.r);
                // three basis states with distinct N(x) eigenvalues
                std::vector<std::size_t> picks;
                std::set<double> seen;
                for (std::size_t b = 0; b < space->dim() && picks.size() < 3; ++b)
                    if (seen.insert(d[static_cast<Eigen::Index>(b)]).second) picks.push_back(b);
                StateVector three = StateVector::zero(space);
                for (auto b : picks) three[b] = cplx(rng.normal(0.0, 1.0), rng.normal(0.0, 1.0));
                three.normalize();
                record(model, "three_eigenvalue", x, three, values, s.config.r);
                for (int i = 0; i < n_random; ++i) record(model, "random", x, random_state(space, rng), values, s.config.r);
            }
        } else {
            const auto rc = rel_config_from_json(c.at("rel"));
            rel::ExactTier tier(rc.kernels(), rc.matter(), rc.n_max, rc.dimension_cap);
            const auto lattice = rc.lattice();
            auto add_row = [&](const std::string& kase, int t) {
                for (int x = 0; x < rc.n_x; ++x) {
                    const auto v = tier.n_values({t, x});
                    record(model, kase, static_cast<std::int64_t>(lattice.index({t, x})), tier.state(), v, rc.r);
                }
            };
            add_row("vacuum", 0);
            // sweep the lattice, hitting every cell once, and test the state row by row
            for (int t = 0; t < rc.n_t; ++t) {
                for (int x = 0; x < rc.n_x; ++x) tier.tomonaga_step({t, x});
                if (t + 1 < rc.n_t) add_row("evolved", t + 1);
                for (int x = 0; x < rc.n_x; ++x) tier.apply_hit({t, x}, tier.sample_z({t, x}, rc.r, rng), rc.r);
            }
        }
    }
    json per_model = json::object();
    for (const auto& [model, dev] : worst) {
        per_model[model] = dev;
        res.checks.push_back(below("max_deviation_" + model, dev, tol));
    }
    res.summary = {{"max_deviation", per_model}, {"tolerance", tol}};
    return res;
}

// ---------------------------------------------------------------------------
// scaling

struct ScalingGeometry {
    int width, gap, margin;
    int n_x() const { return 2 * margin + 2 * width + gap; }
};

rel::RelConfig scaling_config(const json& c, double mu, double r, double J, const ScalingGeometry& g)
{
    rel::RelConfig rc;
    rc.n_x = g.n_x();
    rc.n_t = c.at("max_rows").get<int>();
    rc.kernel = kernel_from_json(c.at("kernel"));
    rc.amplitudes = {cplx(std::sqrt(0.5)), cplx(std::sqrt(0.5))};
    rc.sources = {{0, g.margin, g.margin + g.width, J, 0, -1},
                  {1, g.margin + g.width + g.gap, g.margin + 2 * g.width + g.gap, J, 0, -1}};
    rc.mu = mu;
    rc.r = r;
    rc.tier = rel::Tier::branch;
    rc.hit_mode = rel::HitMode::clt;
    rc.threshold = c.at("threshold").get<double>();
    rc.stop_on_reduction = true;
    rc.record = rel::RecordLevel::outcome;
    return rc;
}

// Largest per-hit separation of branch means once the field images are fully built.
double max_mean_separation(const rel::RelConfig& rc)
{
    rel::RelConfig probe = rc;
    const int depth = rc.kernel.d_f + rc.kernel.d_g + 1;
    probe.n_t = depth + 1;
    rel::BranchTier tier(probe.kernels(), probe.matter(), rel::HitMode::clt);
    for (int t = 0; t < depth; ++t) tier.tomonaga_row(t);
    double worst = 0.0;
    for (int x = 0; x < rc.n_x; ++x) {
        const rel::Cell cell{depth - 1, x};
        worst = std::max(worst, std::abs(tier.n_distribution(0, cell).mean - tier.n_distribution(1, cell).mean));
    }
    return worst;
}

ExperimentResult exp_scaling(const json& c, std::size_t workers)
{
    ExperimentResult res;
    const auto sweep = c.at("sweep").get<std::string>();
    const double from = c.at("from").get<double>(), to = c.at("to").get<double>();
    const int points = c.at("points").get<int>();
    const auto trials = c.at("trials").get<std::size_t>();
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const double min_frac = c.at("min_reduced_fraction").get<double>();
    const double regime_factor = c.at("regime_factor").get<double>();

    res.table.columns = {"point", "parameter", "trial", "reduced", "tau", "hits", "rows", "coherent_hits"};
    std::vector<double> fit_x, fit_y;
    json point_rows = json::array();
    bool regime_ok = true;
    std::size_t total_hits = 0, total_coherent = 0;

    for (int p = 0; p < points; ++p) {
        const double frac = points == 1 ? 0.0 : static_cast<double>(p) / (points - 1);
        double value = from * std::pow(to / from, frac);
        double mu = c.at("mu").get<double>(), r = c.at("r").get<double>(), J = c.at("J").get<double>();
        ScalingGeometry g{c.at("width").get<int>(), c.at("gap").get<int>(), c.at("margin").get<int>()};
        if (sweep == "mu") mu = value;
        if (sweep == "r") r = value;
        if (sweep == "J") J = value;
        const rel::RelConfig probe_geom = scaling_config(c, mu, r, J, g);
        if (sweep == "V_delta") {
            g.width = std::max(1, static_cast<int>(std::lround(value / (2.0 * probe_geom.a_x))));
            value = 2.0 * g.width * probe_geom.a_x;
        }
        const rel::RelConfig rc = scaling_config(c, mu, r, J, g);
        const double v_delta = rc.matter().exclusive_columns(0, 1) * rc.a_x;
        const double dm = max_mean_separation(rc);
        const bool in_regime = r >= regime_factor * dm;
        regime_ok = regime_ok && in_regime;

        struct Trial {
            bool reduced;
            double tau;
            std::size_t hits, rows, coherent;
        };
        const auto out = parallel_trials(trials, workers, [&](std::size_t i) {
            RngStream rng(seed, stream_id(static_cast<std::uint64_t>(p) + 1, i));
            const auto rec = rel::run_relativistic(rc, rng);
            return Trial{rec.tau.has_value(), rec.tau.value_or(kNaN), rec.hit_count, static_cast<std::size_t>(rec.rows_swept),
                         rec.coherent_hits};
        });
        std::vector<double> taus;
        std::size_t reduced = 0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& t = out[i];
            res.table.rows.push_back({static_cast<std::int64_t>(p), value, static_cast<std::int64_t>(i),
                                      static_cast<std::int64_t>(t.reduced), t.tau, static_cast<std::int64_t>(t.hits),
                                      static_cast<std::int64_t>(t.rows), static_cast<std::int64_t>(t.coherent)});
            // unreduced runs count as infinitely slow in the median
            taus.push_back(t.reduced ? t.tau : std::numeric_limits<double>::infinity());
            reduced += t.reduced ? 1 : 0;
            total_hits += t.hits;
            total_coherent += t.coherent;
        }
        const double reduced_frac = static_cast<double>(reduced) / static_cast<double>(trials);
        const double med = stats::median(taus);
        const bool included = reduced_frac >= min_frac && std::isfinite(med) && med > 0.0;
        if (included) {
            fit_x.push_back(std::log(value));
            fit_y.push_back(std::log(med));
        }
        point_rows.push_back({{"point", p},
                              {"parameter", value},
                              {"mu", mu},
                              {"r", r},
                              {"J", J},
                              {"V_delta", v_delta},
                              {"max_mean_separation", dm},
                              {"in_regime", in_regime},
                              {"reduced_fraction", reduced_frac},
                              {"median_tau", std::isfinite(med) ? json(med) : json(nullptr)},
                              {"included", included}});
    }

    stats::LinearFit fit;
    const bool can_fit = fit_x.size() >= 2;
    if (can_fit) fit = stats::fit_line(fit_x, fit_y);
    const double expected = c.at("expected_slope").get<double>();
    const double tol = c.at("slope_tolerance").get<double>();
    res.summary = {{"sweep", sweep},
                   {"points", point_rows},
                   {"included_points", fit_x.size()},
                   {"slope", can_fit ? json(fit.slope) : json(nullptr)},
                   {"slope_se", can_fit ? json(fit.slope_se) : json(nullptr)},
                   {"intercept", can_fit ? json(fit.intercept) : json(nullptr)},
                   {"expected_slope", expected},
                   {"slope_tolerance", tol},
                   {"coherent_hit_fraction", total_hits ? static_cast<double>(total_coherent) / static_cast<double>(total_hits) : 0.0}};
    res.checks.push_back(within("slope", can_fit ? fit.slope : kNaN, expected, tol));
    res.checks.push_back(make_check("included_points", static_cast<double>(fit_x.size()), "value >= 5", fit_x.size() >= 5));
    res.checks.push_back(make_check("regime", regime_ok ? 1.0 : 0.0, "r >= regime_factor * max mean separation at every point", regime_ok));
    return res;
}

// ---------------------------------------------------------------------------
// path independence

double max_amplitude_difference(const StateVector& a, const StateVector& b)
{
    return (a.amplitudes() - b.amplitudes()).cwiseAbs().maxCoeff();
}

struct OrderSweep {
    double max_difference = 0.0;
    std::size_t hits = 0;
    double max_leakage = 0.0;
    std::vector<double> per_order;  // vs the row-by-row reference
};

OrderSweep sweep_orders(const rel::RelConfig& rc, int n_orders, std::uint64_t seed, std::uint64_t group)
{
    const auto lattice = rc.lattice();
    rel::RelConfig cfg = rc;
    cfg.record = rel::RecordLevel::full;
    rel::RunControls ref_controls;
    ref_controls.order = rel::timeslice_order(lattice);
    ref_controls.keep_final_state = true;
    RngStream ref_rng(seed, stream_id(group, 0));
    const auto ref = rel::run_relativistic(cfg, ref_rng, ref_controls);

    std::vector<double> zs(ref.hit_count, kNaN);
    for (const auto& h : ref.hits) zs[h.index] = h.z;

    std::vector<StateVector> finals{*ref.final_state};
    OrderSweep out;
    out.hits = ref.hit_count;
    out.max_leakage = ref.max_leakage;
    out.per_order.push_back(0.0);
    for (int i = 1; i < n_orders; ++i) {
        RngStream order_rng(seed, stream_id(group, 1000 + static_cast<std::uint64_t>(i)));
        rel::RunControls ctl;
        ctl.order = rel::random_admissible_order(lattice, order_rng);
        ctl.replay_z = zs;
        ctl.keep_final_state = true;
        RngStream rng(seed, stream_id(group, 0));  // same sprinkling as the reference
        const auto rec = rel::run_relativistic(cfg, rng, ctl);
        out.max_leakage = std::max(out.max_leakage, rec.max_leakage);
        out.per_order.push_back(max_amplitude_difference(*rec.final_state, finals.front()));
        finals.push_back(*rec.final_state);
    }
    for (std::size_t a = 0; a < finals.size(); ++a)
        for (std::size_t b = a + 1; b < finals.size(); ++b)
            out.max_difference = std::max(out.max_difference, max_amplitude_difference(finals[a], finals[b]));
    return out;
}

ExperimentResult exp_path_independence(const json& c, std::size_t)
{
    ExperimentResult res;
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const int n_orders = c.at("orders").get<int>();
    const double tol = c.at("tolerance").get<double>();
    const rel::RelConfig rc = rel_config_from_json(c.at("rel"));
    res.table.columns = {"kernel", "order", "max_abs_difference_vs_reference"};

    const auto causal = sweep_orders(rc, n_orders, seed, 1);
    for (std::size_t i = 0; i < causal.per_order.size(); ++i)
        res.table.rows.push_back({std::string("causal"), static_cast<std::int64_t>(i), causal.per_order[i]});
    res.checks.push_back(below("max_difference", causal.max_difference, tol));
    json summary = {{"orders", n_orders}, {"hits", causal.hits}, {"max_difference", causal.max_difference},
                    {"max_leakage", causal.max_leakage}, {"tolerance", tol}};

    const double leak = c.at("control_leak").get<double>();
    if (leak > 0.0 && n_orders > 1) {
        rel::RelConfig control = rc;
        control.kernel.acausal_leak = leak;
        control.kernel.leak_radius = c.at("control_radius").get<int>();
        const auto acausal = sweep_orders(control, n_orders, seed, 1);
        for (std::size_t i = 0; i < acausal.per_order.size(); ++i)
            res.table.rows.push_back({std::string("acausal_control"), static_cast<std::int64_t>(i), acausal.per_order[i]});
        const double need = c.at("control_min_difference").get<double>();
        res.checks.push_back(above("control_max_difference", acausal.max_difference, need));
        summary["control_max_difference"] = acausal.max_difference;
        summary["control_hits"] = acausal.hits;
    }
    res.summary = summary;
    return res;
}

// ---------------------------------------------------------------------------
// epr

ExperimentResult exp_epr(const json& c, std::size_t workers)
{
    ExperimentResult res;
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const auto trials = c.at("trials").get<std::size_t>();
    const double weight = c.at("weight").get<double>();
    const int w = c.at("width").get<int>();
    const int gap = c.at("inner_gap").get<int>();
    const int sep = c.at("separation").get<int>();
    const int margin = 2;
    const double J = c.at("J").get<double>();
    const double p_decide = c.at("p_decide").get<double>();
    const double k = c.at("sigma_k").get<double>();
    const double llr_bound = std::log(p_decide / (1.0 - p_decide));

    // region L occupies [0, span), region R [offset, offset + span)
    const int span = 2 * margin + 2 * w + gap;
    const int offset = span + sep;
    const int a0 = margin, b0 = margin + w + gap;

    rel::RelConfig rc;
    rc.n_x = offset + span;
    rc.n_t = c.at("max_rows").get<int>();
    rc.amplitudes = {cplx(std::sqrt(weight)), cplx(std::sqrt(1.0 - weight))};
    // branch 0: L at A, R at B. branch 1: L at B, R at A.
    rc.sources = {{0, a0, a0 + w, J, 0, -1},
                  {0, offset + b0, offset + b0 + w, J, 0, -1},
                  {1, b0, b0 + w, J, 0, -1},
                  {1, offset + a0, offset + a0 + w, J, 0, -1}};
    rc.hit_columns = {{0, span}, {offset, offset + span}};
    rc.mu = c.at("mu").get<double>();
    rc.r = c.at("r").get<double>();
    rc.tier = rel::Tier::branch;
    rc.hit_mode = rel::HitMode::clt;
    rc.record = rel::RecordLevel::outcome;
    rc.threshold = 1.0;

    struct Trial {
        bool decided;
        int out_l, out_r;  // 1 = matter found at A, 0 = at B, -1 undecided
        double t_l, t_r, x_l, x_r;
    };
    const auto out = parallel_trials(trials, workers, [&](std::size_t i) {
        Trial tr{false, -1, -1, kNaN, kNaN, kNaN, kNaN};
        double llr_l = 0.0, llr_r = 0.0;
        double prev = std::log(weight) - std::log1p(-weight);
        rel::RunControls ctl;
        ctl.on_hit = [&](const rel::RelHitRecord& h) {
            const double now = std::log(h.weights[0]) - std::log(h.weights[1]);
            const double inc = now - prev;
            prev = now;
            const bool left = h.cell.x < offset;
            double& llr = left ? llr_l : llr_r;
            llr += inc;
            if (left && tr.out_l < 0 && std::abs(llr) >= llr_bound) {
                tr.out_l = llr > 0 ? 1 : 0;  // branch 0 puts L matter at A
                tr.t_l = h.t;
                tr.x_l = h.x;
            }
            if (!left && tr.out_r < 0 && std::abs(llr) >= llr_bound) {
                tr.out_r = llr > 0 ? 0 : 1;  // branch 0 puts R matter at B
                tr.t_r = h.t;
                tr.x_r = h.x;
            }
            return tr.out_l >= 0 && tr.out_r >= 0;
        };
        RngStream rng(seed, i);
        rel::run_relativistic(rc, rng, ctl);
        tr.decided = tr.out_l >= 0 && tr.out_r >= 0;
        return tr;
    });

    res.table.columns = {"trial", "decided", "left_at_A", "right_at_A", "t_left", "t_right", "x_left", "x_right", "first"};
    std::size_t n = 0, left_a = 0, right_a = 0, same = 0, spacelike = 0;
    std::size_t n_lfirst = 0, same_lfirst = 0, n_rfirst = 0, same_rfirst = 0;
    double sum_ab = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& t = out[i];
        const std::string first = !t.decided ? "none" : (t.t_l <= t.t_r ? "left" : "right");
        res.table.rows.push_back({static_cast<std::int64_t>(i), static_cast<std::int64_t>(t.decided),
                                  static_cast<std::int64_t>(t.out_l), static_cast<std::int64_t>(t.out_r), t.t_l, t.t_r, t.x_l,
                                  t.x_r, first});
        if (!t.decided) continue;
        ++n;
        left_a += t.out_l == 1;
        right_a += t.out_r == 1;
        const bool s = t.out_l == t.out_r;
        same += s;
        sum_ab += (t.out_l == 1 ? 1.0 : -1.0) * (t.out_r == 1 ? 1.0 : -1.0);
        if (std::abs(t.t_l - t.t_r) * rc.a_t < std::abs(t.x_l - t.x_r)) ++spacelike;
        if (first == "left") {
            ++n_lfirst;
            same_lfirst += s;
        } else {
            ++n_rfirst;
            same_rfirst += s;
        }
    }
    const double dn = static_cast<double>(n);
    const double pl = n ? left_a / dn : kNaN, pr = n ? right_a / dn : kNaN;
    const double ma = 2.0 * pl - 1.0, mb = 2.0 * pr - 1.0;
    const double cov = n ? sum_ab / dn - ma * mb : kNaN;
    const double corr = cov / std::sqrt((1.0 - ma * ma) * (1.0 - mb * mb));
    // with zero observed concordance the binomial sigma is floored at q = 1/n
    auto floored_sigma = [](std::size_t hits, std::size_t total) {
        if (total == 0) return kNaN;
        const double q = std::max(static_cast<double>(hits) / static_cast<double>(total), 1.0 / static_cast<double>(total));
        return stats::binomial_sigma(q, total);
    };
    const double q = n ? same / dn : kNaN;
    const double sig_q = floored_sigma(same, n);
    const double sig_m = stats::binomial_sigma(weight, n);

    res.summary = {{"trials", trials},
                   {"decided", n},
                   {"undecided", trials - n},
                   {"p_left_at_A", pl},
                   {"p_right_at_A", pr},
                   {"concordance", q},
                   {"correlation", corr},
                   {"correlation_sigma", 2.0 * sig_q},
                   {"spacelike_decisions", n ? spacelike / dn : kNaN},
                   {"left_first", {{"n", n_lfirst}, {"concordance", n_lfirst ? same_lfirst / static_cast<double>(n_lfirst) : kNaN}}},
                   {"right_first", {{"n", n_rfirst}, {"concordance", n_rfirst ? same_rfirst / static_cast<double>(n_rfirst) : kNaN}}},
                   {"llr_bound", llr_bound}};
    res.checks.push_back(within("correlation", corr, -1.0, k * 2.0 * sig_q));
    res.checks.push_back(within("p_left_at_A", pl, weight, k * sig_m));
    res.checks.push_back(within("p_right_at_A", pr, 1.0 - weight, k * sig_m));
    res.checks.push_back(within("concordance_left_first", n_lfirst ? same_lfirst / static_cast<double>(n_lfirst) : 0.0, 0.0,
                                k * floored_sigma(same_lfirst, std::max<std::size_t>(n_lfirst, 1))));
    res.checks.push_back(within("concordance_right_first", n_rfirst ? same_rfirst / static_cast<double>(n_rfirst) : 0.0, 0.0,
                                k * floored_sigma(same_rfirst, std::max<std::size_t>(n_rfirst, 1))));
    return res;
}

// ---------------------------------------------------------------------------
// sprinkling invariance

struct Parallelogram {
    double e1t, e1x, e2t, e2x;  // edge vectors from the origin

    bool contains(double t, double x) const
    {
        const double det = e1t * e2x - e1x * e2t;
        const double a = (t * e2x - x * e2t) / det;
        const double b = (e1t * x - e1x * t) / det;
        return a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0;
    }
    Region bounding_box() const
    {
        const double ts[4] = {0.0, e1t, e2t, e1t + e2t}, xs[4] = {0.0, e1x, e2x, e1x + e2x};
        return {*std::min_element(ts, ts + 4), *std::max_element(ts, ts + 4), *std::min_element(xs, xs + 4),
                *std::max_element(xs, xs + 4)};
    }
};

// The square of the given area with both edges boosted by `rapidity`.
Parallelogram boosted_square(double area, double rapidity)
{
    const double side = std::sqrt(area);
    const double ch = std::cosh(rapidity), sh = std::sinh(rapidity);
    return {side * ch, side * sh, side * sh, side * ch};
}

std::uint64_t count_inside(const Parallelogram& p, double mu, bool biased, RngStream& rng)
{
    const Region box = p.bounding_box();
    if (!biased) {
        std::uint64_t n = 0;
        for (const auto& pt : sprinkle(box, mu, rng).points) n += p.contains(pt.t, pt.x);
        return n;
    }
    // negative control: right number of points, but crowded towards low x
    const std::uint64_t total = rng.poisson(mu * box.area());
    std::uint64_t n = 0;
    for (std::uint64_t i = 0; i < total; ++i) {
        const double t = box.t0 + (box.t1 - box.t0) * rng.uniform();
        const double u = rng.uniform();
        const double x = box.x0 + (box.x1 - box.x0) * u * u;
        n += p.contains(t, x);
    }
    return n;
}

ExperimentResult exp_sprinkling(const json& c, std::size_t workers)
{
    ExperimentResult res;
    const auto seed = c.at("master_seed").get<std::uint64_t>();
    const double mu = c.at("mu").get<double>(), area = c.at("area").get<double>();
    const auto draws = c.at("draws").get<std::size_t>();
    const double alpha = c.at("alpha").get<double>();
    const double mean = mu * area;
    res.table.columns = {"sprinkler", "rapidity", "draw", "count"};
    json per = json::array();

    auto run = [&](const std::string& kind, double eta, std::uint64_t group, bool biased) {
        const auto shape = boosted_square(area, eta);
        const auto counts = parallel_trials(draws, workers, [&](std::size_t i) {
            RngStream rng(seed, stream_id(group, i));
            return count_inside(shape, mu, biased, rng);
        });
        for (std::size_t i = 0; i < counts.size(); ++i)
            res.table.rows.push_back({kind, eta, static_cast<std::int64_t>(i), static_cast<std::int64_t>(counts[i])});
        const auto chi = stats::chi_square_counts(counts, [&](std::uint64_t k) { return stats::poisson_pmf(k, mean); });
        double avg = 0.0;
        for (auto v : counts) avg += static_cast<double>(v);
        avg /= static_cast<double>(counts.size());
        per.push_back({{"sprinkler", kind}, {"rapidity", eta}, {"mean_count", avg}, {"expected_mean", mean},
                       {"chi_square", chi.statistic}, {"dof", chi.dof}, {"p_value", chi.p_value}});
        return chi.p_value;
    };

    const auto& raps = c.at("rapidities");
    double max_eta = 0.0;
    for (std::size_t i = 0; i < raps.size(); ++i) {
        const double eta = raps[i].get<double>();
        max_eta = std::max(max_eta, std::abs(eta));
        const double p = run("uniform", eta, 1 + i, false);
        res.checks.push_back(above("p_value_rapidity_" + fmt(eta), p, alpha));
    }
    if (c.at("control").get<bool>()) {
        const double eta = max_eta > 0.0 ? max_eta : 1.0;
        const double p = run("biased", eta, 1000, true);
        res.checks.push_back(below("control_p_value", p, alpha));
    }
    res.summary = {{"mu", mu}, {"area", area}, {"draws", draws}, {"alpha", alpha}, {"tests", per}};
    return res;
}

std::string csv_cell(const CsvValue& v)
{
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        if (std::isnan(*d)) return "nan";
        if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    return std::get<std::string>(v);
}

}  // namespace

bool ExperimentResult::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Check* ExperimentResult::check(const std::string& n) const
{
    for (const auto& c : checks)
        if (c.name == n) return &c;
    return nullptr;
}

ExperimentResult run_experiment(const json& normalized, std::size_t workers)
{
    const auto name = normalized.at("experiment").get<std::string>();
    ExperimentResult res;
    if (name == "born")
        res = exp_born(normalized, workers);
    else if (name == "martingale")
        res = exp_martingale(normalized, workers);
    else if (name == "scaling")
        res = exp_scaling(normalized, workers);
    else if (name == "path_independence")
        res = exp_path_independence(normalized, workers);
    else if (name == "epr")
        res = exp_epr(normalized, workers);
    else if (name == "sprinkling_invariance")
        res = exp_sprinkling(normalized, workers);
    else
        throw ConfigError("unknown experiment \"" + name + "\"");
    res.name = name;
    res.config_digest = config_digest(normalized);
    res.master_seed = normalized.at("master_seed").get<std::uint64_t>();
    res.config = normalized;
    res.config.erase("workers");
    res.config.erase("out_dir");
    return res;
}

std::string format_csv(const ExperimentResult& r)
{
    std::string out;
    out += "# experiment: " + r.name + "\n";
    out += "# config_digest: " + r.config_digest + "\n";
    out += "# master_seed: " + std::to_string(r.master_seed) + "\n";
    for (std::size_t i = 0; i < r.table.columns.size(); ++i) out += (i ? "," : "") + r.table.columns[i];
    out += "\n";
    for (const auto& row : r.table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
        out += "\n";
    }
    return out;
}

std::string format_json(const ExperimentResult& r)
{
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name},
                          {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                          {"rule", c.rule},
                          {"passed", c.passed}});
    }
    const json doc = {{"experiment", r.name},     {"config_digest", r.config_digest}, {"master_seed", r.master_seed},
                      {"passed", r.passed()},     {"checks", checks},                 {"summary", r.summary},
                      {"config", r.config}};
    return doc.dump(2) + "\n";
}

void write_outputs(const ExperimentResult& r, const std::string& out_dir)
{
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    std::ofstream csv(dir / (r.name + ".csv"), std::ios::binary);
    csv << format_csv(r);
    std::ofstream js(dir / (r.name + ".json"), std::ios::binary);
    js << format_json(r);
    if (!csv || !js) throw ConfigError("cannot write results to " + out_dir);
}

// ---------------------------------------------------------------------------

MicrocausalityReport check_microcausality(int n_t, int n_x, int n_max, const rel::KernelSpec& spec)
{
    const rel::SpacetimeLattice lattice(n_t, n_x);
    const rel::CausalKernelPair kernels(lattice, spec);
    rel::MatterBranchSet matter(lattice, {cplx(1.0), cplx(1.0)});
    matter.add_block(0, 0, n_x, 1.0);
    matter.add_block(1, 0, n_x, 0.5);
    MicrocausalityReport rep;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
        for (std::size_t j = 0; j < lattice.size(); ++j) {
            if (i == j) continue;
            const rel::Cell x = lattice.cell(i), xp = lattice.cell(j);
            const auto rel_xy = rel::causal_relation(lattice, x, xp);
            bool overlap = false;
            kernels.for_each_f(x, [&](rel::Cell y, double) { overlap = overlap || kernels.g(xp, y) != 0.0; });
            if (rel_xy != rel::Causal::spacelike && !overlap) continue;

            std::vector<rel::Cell> cells;
            for (const auto& e : kernels.f_window(x)) cells.push_back(e.cell);
            for (const auto& e : kernels.g_window(xp)) cells.push_back(e.cell);
            const rel::ModeMap modes(cells, n_max, 1);
            const auto n_op = rel::smeared_N(x, kernels, modes);
            const auto a_op = rel::smeared_A(xp, kernels, modes);
            const double na = commutator_norm(n_op, a_op);
            if (rel_xy == rel::Causal::spacelike) {
                ++rep.spacelike_pairs;
                rep.max_spacelike_na = std::max(rep.max_spacelike_na, na);
                const rel::ModeMap reg_modes(cells, n_max, 2);
                const auto gen = rel::interaction_generator(xp, kernels, reg_modes, matter);
                rep.max_spacelike_generator =
                    std::max(rep.max_spacelike_generator, commutator_norm(rel::smeared_N(x, kernels, reg_modes), gen));
            } else {
                ++rep.timelike_overlapping_pairs;
                rep.max_timelike_na = std::max(rep.max_timelike_na, na);
                const auto direct = commutator(n_op, a_op).to_dense();
                const auto closed = rel::number_field_commutator(x, xp, kernels, modes).to_dense();
                rep.max_closed_form_error = std::max(rep.max_closed_form_error, (direct - closed).cwiseAbs().maxCoeff());
            }
        }
    }
    return rep;
}

rel::RelConfig tier_equivalence_instance(double J, double r, double mu, int n_max)
{
    rel::RelConfig c;
    c.n_t = 3;
    c.n_x = 4;
    c.amplitudes = {cplx(std::sqrt(0.5)), cplx(std::sqrt(0.5))};
    c.sources = {{0, 0, 4, J, 0, 1}};
    c.mu = mu;
    c.r = r;
    c.tier = rel::Tier::exact;
    c.hit_mode = rel::HitMode::enumerate;
    c.n_max = n_max;
    c.dimension_cap = std::size_t{1} << 24;
    c.hit_t0 = 2;
    c.hit_t1 = 3;
    c.threshold = 1.0;
    return c;
}

TierEquivalenceReport check_tier_equivalence(const rel::RelConfig& exact_config, std::uint64_t seed)
{
    rel::RelConfig ec = exact_config;
    ec.tier = rel::Tier::exact;
    ec.record = rel::RecordLevel::full;
    RngStream rng(seed, 0);
    const auto ex = rel::run_relativistic(ec, rng);

    rel::RelConfig bc = ec;
    bc.tier = rel::Tier::branch;
    bc.hit_mode = rel::HitMode::enumerate;
    rel::RunControls ctl;
    std::vector<double> zs(ex.hit_count);
    for (const auto& h : ex.hits) zs[h.index] = h.z;
    ctl.replay_z = zs;
    RngStream rng2(seed, 0);
    const auto br = rel::run_relativistic(bc, rng2, ctl);

    TierEquivalenceReport rep;
    rep.hits = ex.hit_count;
    rep.overlap = br.final_overlap;
    rep.exact_leakage = ex.max_leakage;
    for (std::size_t i = 0; i < ex.hits.size() && i < br.hits.size(); ++i) {
        rep.exact_weights.push_back(ex.hits[i].weights);
        rep.branch_weights.push_back(br.hits[i].weights);
        for (std::size_t k = 0; k < ex.hits[i].weights.size(); ++k)
            rep.max_abs_difference = std::max(rep.max_abs_difference, std::abs(ex.hits[i].weights[k] - br.hits[i].weights[k]));
    }
    return rep;
}

}  // namespace collapse

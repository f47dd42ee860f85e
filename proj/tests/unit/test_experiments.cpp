#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "collapse/errors.hpp"
#include "collapse/experiments.hpp"
#include "collapse/run_config.hpp"

using namespace collapse;

namespace {

bool mentions(const std::vector<std::string>& v, const std::string& needle)
{
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

json rel_born(double weight, int trials)
{
    return json::parse(R"({"experiment":"born","model":"rel","trials":)" + std::to_string(trials) + R"(,"weight":)" +
                       std::to_string(weight) + R"(,
      "rel":{"n_t":100000,"n_x":24,"mu":0.5,"r":6,"threshold":0.999,
        "branches":[{"amplitude":1,"sources":[{"x0":2,"x1":10,"J":0.7071}]},
                    {"amplitude":1,"sources":[{"x0":14,"x1":22,"J":0.7071}]}]}})");
}

}  // namespace

TEST_CASE("experiment list")
{
    const auto& n = experiment_names();
    CHECK(n.size() == 6);
    CHECK(std::find(n.begin(), n.end(), "sprinkling_invariance") != n.end());
}

TEST_CASE("schema: missing, unknown and out-of-range keys")
{
    auto v = config_violations(json::parse(R"({"experiment":"born","model":"grw","weight":0.5,"grw":{}})"));
    CHECK(mentions(v, "grw.r: required key missing"));
    v = config_violations(json::parse(R"({"experiment":"born","model":"grw","weight":0.5,"grw":{"r":1},"colour":1})"));
    CHECK(mentions(v, "colour: unknown key"));
    v = config_violations(json::parse(R"({"experiment":"born","model":"grw","weight":0.5,"grw":{"r":1,"lambda":-2}})"));
    CHECK(mentions(v, "grw.lambda"));
    auto bad_mu = rel_born(0.5, 10);
    bad_mu["rel"]["mu"] = -1;
    v = config_violations(bad_mu);
    CHECK(mentions(v, "rel.mu: must satisfy mu >= 0"));
    CHECK(config_violations(json::parse(R"({"experiment":"nope"})")).size() == 1);
    CHECK(config_violations(rel_born(0.5, 10)).empty());
}

TEST_CASE("schema: exact tier over the dimension cap")
{
    const auto c = json::parse(R"({"experiment":"path_independence","rel":{"n_t":6,"n_x":6,"mu":1,"r":1,"tier":"exact",
        "n_max":9,"dimension_cap":1000,"branches":[{"amplitude":1,"sources":[{"x0":0,"x1":6,"J":1}]}]}})");
    const auto v = config_violations(c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("rel.dimension_cap") != std::string::npos);
    CHECK(v[0].find("exceeds the cap 1000") != std::string::npos);
}

TEST_CASE("parse errors carry a position")
{
    try {
        parse_config_text("{\n  \"a\": 1,\n  oops\n}");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("normalization fills defaults and the digest ignores execution keys")
{
    auto c = rel_born(0.5, 10);
    const auto n = normalize_config(c);
    CHECK(n["sigma_k"] == 3.0);
    CHECK(n["rel"]["kernel"]["d_f"] == 1);
    auto c2 = c;
    c2["workers"] = 4;
    c2["out_dir"] = "elsewhere";
    CHECK(config_digest(n) == config_digest(normalize_config(c2)));
    c2["master_seed"] = 5;
    CHECK(config_digest(n) != config_digest(normalize_config(c2)));
    CHECK(config_digest(n).size() == 16);
    c["rel"]["mu"] = -3;
    CHECK_THROWS_AS(normalize_config(c), ConfigError);
}

TEST_CASE("parallel_trials keeps index order and propagates errors")
{
    const auto out = parallel_trials(50, 4, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < 50; ++i) CHECK(out[i] == i * i);
    CHECK_THROWS_AS(parallel_trials(10, 3,
                                    [](std::size_t i) {
                                        if (i == 7) throw NumericalError("boom");
                                        return i;
                                    }),
                    NumericalError);
}

TEST_CASE("born: certain outcome and worker independence")
{
    const auto one = run_experiment(normalize_config(rel_born(1.0, 40)));
    CHECK(one.summary["frequency"] == 1.0);
    CHECK(one.passed());
    const auto cfg = normalize_config(rel_born(0.5, 60));
    const auto a = run_experiment(cfg, 1), b = run_experiment(cfg, 4);
    CHECK(format_csv(a) == format_csv(b));
    CHECK(format_json(a) == format_json(b));
}

TEST_CASE("csv layout")
{
    const auto r = run_experiment(normalize_config(rel_born(0.5, 3)));
    const auto csv = format_csv(r);
    CHECK(csv.rfind("# experiment: born\n# config_digest: " + r.config_digest + "\n# master_seed: 0\ntrial,outcome,p_second,hits\n", 0) == 0);
    ExperimentResult fake;
    fake.name = "x";
    fake.table.columns = {"v"};
    fake.table.rows = {{0.1}, {std::int64_t{3}}, {std::string("s")}};
    CHECK(format_csv(fake).find("v\n0.10000000000000001\n3\ns\n") != std::string::npos);
}

TEST_CASE("path independence with a single order is exactly zero")
{
    const auto c = json::parse(R"({"experiment":"path_independence","orders":1,"control_leak":0,
      "rel":{"n_t":3,"n_x":3,"mu":1,"r":1,"tier":"exact","n_max":3,
        "branches":[{"amplitude":1,"sources":[{"x0":1,"x1":2,"J":0.5,"t0":0,"t1":1}]}]}})");
    const auto r = run_experiment(normalize_config(c));
    CHECK(r.summary["max_difference"] == 0.0);
}

TEST_CASE("sprinkling boost preserves the expected count")
{
    const auto c = json::parse(R"({"experiment":"sprinkling_invariance","draws":2000,"rapidities":[0,1.5],"control":false})");
    const auto r = run_experiment(normalize_config(c));
    for (const auto& t : r.summary["tests"]) CHECK(t["mean_count"].get<double>() == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("microcausality: causal kernels commute, leaky ones do not")
{
    const auto ok = check_microcausality(4, 4, 1, rel::KernelSpec{});
    CHECK(ok.spacelike_pairs > 0);
    CHECK(ok.max_spacelike_na == 0.0);
    CHECK(ok.max_timelike_na > 1e-3);
    rel::KernelSpec leaky;
    leaky.acausal_leak = 0.5;
    CHECK(check_microcausality(4, 4, 1, leaky).max_spacelike_na > 1e-3);
}

#include "collapse/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "collapse/errors.hpp"

namespace collapse {

namespace {

enum class Kind { number, integer, boolean, string, object, array, complex };

struct Field;
using Schema = std::vector<Field>;

struct Field {
    std::string key;
    Kind kind = Kind::number;
    bool required = false;
    json fallback;  // null: no default
    std::optional<double> min, max;
    bool min_open = false, max_open = false;
    std::vector<std::string> choices;
    std::shared_ptr<const Schema> object;   // object fields, or array elements that are objects
    std::shared_ptr<const Field> element;   // array elements
    std::size_t min_items = 0;
    std::size_t max_items = std::size_t(-1);
};

// small builders so the schemas below read like tables
Field make(std::string key, Kind kind)
{
    Field f;
    f.key = std::move(key);
    f.kind = kind;
    return f;
}
Field num(std::string key) { return make(std::move(key), Kind::number); }
Field integer(std::string key) { return make(std::move(key), Kind::integer); }
Field boolean(std::string key) { return make(std::move(key), Kind::boolean); }
Field str(std::string key, std::vector<std::string> choices = {})
{
    Field f = make(std::move(key), Kind::string);
    f.choices = std::move(choices);
    return f;
}
Field obj(std::string key, Schema s)
{
    Field f = make(std::move(key), Kind::object);
    f.object = std::make_shared<const Schema>(std::move(s));
    return f;
}
Field arr(std::string key, Field element)
{
    Field f = make(std::move(key), Kind::array);
    f.element = std::make_shared<const Field>(std::move(element));
    return f;
}
Field cplx_field(std::string key) { return make(std::move(key), Kind::complex); }

Field req(Field f)
{
    f.required = true;
    return f;
}
Field def(Field f, json v)
{
    f.fallback = std::move(v);
    return f;
}
Field ge(Field f, double v)
{
    f.min = v;
    return f;
}
Field gt(Field f, double v)
{
    f.min = v;
    f.min_open = true;
    return f;
}
Field le(Field f, double v)
{
    f.max = v;
    return f;
}
Field lt(Field f, double v)
{
    f.max = v;
    f.max_open = true;
    return f;
}
Field items(Field f, std::size_t lo, std::size_t hi)
{
    f.min_items = lo;
    f.max_items = hi;
    return f;
}

std::string fmt_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string join_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const char* kind_name(Kind k)
{
    switch (k) {
    case Kind::number: return "a number";
    case Kind::integer: return "an integer";
    case Kind::boolean: return "a boolean";
    case Kind::string: return "a string";
    case Kind::object: return "an object";
    case Kind::array: return "an array";
    case Kind::complex: return "a number or a [re, im] pair";
    }
    return "?";
}

json check_value(const Field& f, const json& v, const std::string& path, std::vector<std::string>& errors);

json check_object(const Schema& schema, const json& v, const std::string& path, std::vector<std::string>& errors)
{
    json out = json::object();
    if (!v.is_object()) {
        errors.push_back((path.empty() ? std::string("config") : path) + ": must be an object");
        return out;
    }
    for (const auto& [key, value] : v.items()) {
        bool known = false;
        for (const auto& f : schema) known = known || f.key == key;
        if (!known) errors.push_back(join_path(path, key) + ": unknown key");
    }
    for (const auto& f : schema) {
        const std::string p = join_path(path, f.key);
        if (v.contains(f.key)) {
            out[f.key] = check_value(f, v.at(f.key), p, errors);
        } else if (f.required) {
            errors.push_back(p + ": required key missing");
        } else if (!f.fallback.is_null()) {
            out[f.key] = f.kind == Kind::object ? check_value(f, f.fallback, p, errors) : f.fallback;
        }
    }
    return out;
}

json check_value(const Field& f, const json& v, const std::string& path, std::vector<std::string>& errors)
{
    const std::string name = f.key.empty() ? path : f.key;
    switch (f.kind) {
    case Kind::number:
    case Kind::integer: {
        if (!v.is_number() || (f.kind == Kind::integer && !v.is_number_integer())) {
            errors.push_back(path + ": must be " + kind_name(f.kind));
            return v;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) errors.push_back(path + ": must be finite");
        if (f.min && (f.min_open ? !(x > *f.min) : !(x >= *f.min)))
            errors.push_back(path + ": must satisfy " + name + (f.min_open ? " > " : " >= ") + fmt_number(*f.min) +
                             " (got " + fmt_number(x) + ")");
        if (f.max && (f.max_open ? !(x < *f.max) : !(x <= *f.max)))
            errors.push_back(path + ": must satisfy " + name + (f.max_open ? " < " : " <= ") + fmt_number(*f.max) +
                             " (got " + fmt_number(x) + ")");
        return v;
    }
    case Kind::boolean:
        if (!v.is_boolean()) errors.push_back(path + ": must be " + kind_name(f.kind));
        return v;
    case Kind::string: {
        if (!v.is_string()) {
            errors.push_back(path + ": must be " + kind_name(f.kind));
            return v;
        }
        if (!f.choices.empty()) {
            const auto s = v.get<std::string>();
            bool ok = false;
            for (const auto& c : f.choices) ok = ok || c == s;
            if (!ok) {
                std::string list;
                for (const auto& c : f.choices) list += (list.empty() ? "" : ", ") + c;
                errors.push_back(path + ": must be one of {" + list + "} (got \"" + s + "\")");
            }
        }
        return v;
    }
    case Kind::complex:
        if (v.is_number()) return json::array({v, 0.0});
        if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return v;
        errors.push_back(path + ": must be " + kind_name(f.kind));
        return v;
    case Kind::object:
        return check_object(*f.object, v, path, errors);
    case Kind::array: {
        if (!v.is_array()) {
            errors.push_back(path + ": must be " + kind_name(f.kind));
            return v;
        }
        if (v.size() < f.min_items) errors.push_back(path + ": needs at least " + std::to_string(f.min_items) + " entries");
        if (v.size() > f.max_items) errors.push_back(path + ": allows at most " + std::to_string(f.max_items) + " entries");
        json out = json::array();
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(check_value(*f.element, v[i], path + "[" + std::to_string(i) + "]", errors));
        return out;
    }
    }
    return v;
}

// ---------------------------------------------------------------------------
// schemas

Schema kernel_schema()
{
    return {
        def(ge(integer("d_f"), 1), 1),
        def(ge(integer("d_g"), 1), 1),
        def(num("g0"), 1.0),
        def(str("profile", {"uniform", "cone_gaussian"}), "uniform"),
        def(gt(num("s"), 0), 1.0),
        def(ge(num("acausal_leak"), 0), 0.0),
        def(ge(integer("leak_radius"), 1), 1),
    };
}

Schema rel_schema()
{
    Schema source{
        req(ge(integer("x0"), 0)), req(ge(integer("x1"), 1)), req(ge(num("J"), 0)),
        def(ge(integer("t0"), 0), 0), def(ge(integer("t1"), -1), -1),
    };
    Schema branch{
        def(cplx_field("amplitude"), 1.0),
        def(arr("sources", obj("", source)), json::array()),
    };
    return {
        req(ge(integer("n_t"), 1)),
        req(ge(integer("n_x"), 1)),
        def(gt(num("a_t"), 0), 1.0),
        def(gt(num("a_x"), 0), 1.0),
        req(ge(num("mu"), 0)),
        req(gt(num("r"), 0)),
        def(str("tier", {"exact", "branch"}), "branch"),
        def(str("hit_mode", {"clt", "enumerate"}), "clt"),
        def(ge(integer("n_max"), 1), 4),
        def(ge(integer("dimension_cap"), 1), 4194304),
        def(le(gt(num("threshold"), 0.5), 1.0), 0.99),
        def(obj("kernel", kernel_schema()), json::object()),
        req(items(arr("branches", obj("", branch)), 1, 64)),
        def(arr("hit_columns", items(arr("", ge(integer(""), 0)), 2, 2)), json::array()),
        def(items(arr("hit_rows", ge(integer(""), -1)), 2, 2), json::array({0, -1})),
    };
}

Schema grw_schema()
{
    return {
        req(gt(num("r"), 0)),
        def(gt(num("lambda"), 0), 1.0),
        def(gt(num("T"), 0), 50.0),
        def(gt(num("separation"), 0), 10.0),
        def(gt(num("sigma"), 0), 0.5),
        def(gt(num("dx"), 0), 0.2),
        def(gt(num("wall"), 0), 12.0),
        def(str("hamiltonian", {"none", "free", "harmonic"}), "none"),
        def(gt(num("omega"), 0), 1.0),
        def(gt(num("dt"), 0), 0.01),
        def(le(gt(num("reduce_threshold"), 0.5), 1.0), 0.99),
    };
}

Schema fieldloc_schema()
{
    return {
        def(ge(integer("n_sites"), 2), 4),
        def(ge(integer("n_max"), 1), 1),
        req(gt(num("r"), 0)),
        def(ge(num("mu"), 0), 1.0),
        def(gt(num("T"), 0), 20.0),
        def(ge(num("hopping"), 0), 0.0),
        def(gt(num("dt"), 0), 0.1),
        def(ge(num("kernel_width"), 0), 0.0),
        def(ge(integer("kernel_radius"), 0), 0),
        def(items(arr("sites", ge(integer(""), 0)), 2, 2), json::array({0, 2})),
        def(le(gt(num("reduce_threshold"), 0.5), 1.0), 0.99),
    };
}

Schema common_schema(const std::string& experiment, int trials_default)
{
    return {
        req(str("experiment", {experiment})),
        def(ge(integer("master_seed"), 0), 0),
        def(ge(integer("trials"), 1), trials_default),
        def(ge(integer("workers"), 1), 1),
        def(str("out_dir"), "results"),
    };
}

Schema with(Schema base, const Schema& extra)
{
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
}

Schema schema_for(const std::string& name)
{
    if (name == "born")
        return with(common_schema(name, 10000), {
                                                    req(str("model", {"grw", "fieldloc", "rel"})),
                                                    req(le(ge(num("weight"), 0), 1)),
                                                    def(gt(num("sigma_k"), 0), 3.0),
                                                    obj("grw", grw_schema()),
                                                    obj("fieldloc", fieldloc_schema()),
                                                    obj("rel", rel_schema()),
                                                });
    if (name == "martingale")
        return with(common_schema(name, 1),
                    {
                        def(items(arr("models", str("", {"grw", "fieldloc", "rel"})), 1, 3), json::array({"grw", "fieldloc", "rel"})),
                        def(gt(num("tolerance"), 0), 1e-8),
                        def(ge(integer("random_states"), 1), 3),
                        obj("grw", grw_schema()),
                        obj("fieldloc", fieldloc_schema()),
                        obj("rel", rel_schema()),
                    });
    if (name == "scaling")
        return with(common_schema(name, 200), {
                                                  req(str("sweep", {"mu", "r", "J", "V_delta"})),
                                                  req(gt(num("from"), 0)),
                                                  req(gt(num("to"), 0)),
                                                  def(ge(integer("points"), 5), 6),
                                                  def(gt(num("mu"), 0), 0.1),
                                                  def(gt(num("r"), 0), 6.0),
                                                  def(gt(num("J"), 0), 1.4142135623730951),
                                                  def(ge(integer("width"), 1), 8),
                                                  def(ge(integer("gap"), 4), 4),
                                                  def(ge(integer("margin"), 0), 2),
                                                  def(le(gt(num("threshold"), 0.5), 1.0), 0.99),
                                                  def(ge(integer("max_rows"), 1), 2000000),
                                                  def(le(ge(num("min_reduced_fraction"), 0), 1), 0.8),
                                                  req(num("expected_slope")),
                                                  req(gt(num("slope_tolerance"), 0)),
                                                  def(ge(num("regime_factor"), 0), 3.0),
                                                  def(obj("kernel", kernel_schema()), json::object()),
                                              });
    if (name == "path_independence")
        return with(common_schema(name, 1), {
                                                req(obj("rel", rel_schema())),
                                                def(ge(integer("orders"), 1), 8),
                                                def(gt(num("tolerance"), 0), 1e-9),
                                                def(ge(num("control_leak"), 0), 0.5),
                                                def(ge(integer("control_radius"), 1), 1),
                                                def(gt(num("control_min_difference"), 0), 1e-3),
                                            });
    if (name == "epr")
        return with(common_schema(name, 5000), {
                                                   def(le(ge(num("weight"), 0), 1), 0.5),
                                                   def(ge(integer("width"), 1), 4),
                                                   def(ge(integer("inner_gap"), 4), 4),
                                                   def(ge(integer("separation"), 1), 60),
                                                   def(gt(num("J"), 0), 1.0),
                                                   def(gt(num("r"), 0), 2.0),
                                                   def(gt(num("mu"), 0), 1.0),
                                                   def(lt(gt(num("p_decide"), 0.5), 1.0), 0.999999),
                                                   def(ge(integer("max_rows"), 1), 100000),
                                                   def(gt(num("sigma_k"), 0), 3.0),
                                               });
    if (name == "sprinkling_invariance")
        return with(common_schema(name, 1), {
                                                def(gt(num("mu"), 0), 5.0),
                                                def(gt(num("area"), 0), 1.0),
                                                def(items(arr("rapidities", num("")), 1, 64), json::array({0.0, 0.5, 1.0})),
                                                def(ge(integer("draws"), 1), 10000),
                                                def(lt(gt(num("alpha"), 0), 1), 0.01),
                                                def(boolean("control"), true),
                                            });
    throw ConfigError("unknown experiment \"" + name + "\"");
}

std::size_t line_of(const std::string& text, std::size_t byte, std::size_t& column)
{
    std::size_t line = 1;
    column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return line;
}

// cross-field checks that need the assembled model
void semantic_checks(const json& c, std::vector<std::string>& errors)
{
    const std::string name = c.at("experiment").get<std::string>();
    auto rel_check = [&](const std::string& key, bool need_exact) {
        if (!c.contains(key)) return;
        try {
            const auto rc = rel_config_from_json(c.at(key));
            if (need_exact && rc.tier != rel::Tier::exact) errors.push_back(key + ".tier: must be \"exact\" for " + name);
            if (rc.tier == rel::Tier::exact) {
                const std::size_t dim = rc.exact_dimension();
                if (dim > rc.dimension_cap)
                    errors.push_back(key + ".dimension_cap: exact tier dimension " + std::to_string(dim) +
                                     " exceeds the cap " + std::to_string(rc.dimension_cap));
            }
            rc.validate();
        } catch (const ConfigError& e) {
            const std::string what = e.what();
            if (what.find("exceeds dimension_cap") == std::string::npos) errors.push_back(key + ": " + what);
        }
    };
    if (name == "born") {
        const auto model = c.at("model").get<std::string>();
        if (!c.contains(model)) errors.push_back(model + ": required key missing (model is \"" + model + "\")");
        if (model == "rel" && c.contains("rel") && c.at("rel").at("branches").size() != 2)
            errors.push_back("rel.branches: born needs exactly 2 branches");
        rel_check("rel", false);
    } else if (name == "martingale") {
        for (const auto& m : c.at("models"))
            if (!c.contains(m.get<std::string>()))
                errors.push_back(m.get<std::string>() + ": required key missing (listed in models)");
        rel_check("rel", true);
    } else if (name == "path_independence") {
        rel_check("rel", true);
    } else if (name == "scaling") {
        const double lo = c.at("from").get<double>(), hi = c.at("to").get<double>();
        if (!(hi >= lo * 10.0 * (1.0 - 1e-12)) && !(lo >= hi * 10.0 * (1.0 - 1e-12)))
            errors.push_back("to: sweep must span at least one decade (from " + fmt_number(lo) + " to " + fmt_number(hi) + ")");
    }
}

}  // namespace

const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names{"born", "martingale", "scaling", "path_independence", "epr",
                                                "sprinkling_invariance"};
    return names;
}

json parse_config_text(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t col = 0;
        const std::size_t line = line_of(text, e.byte == 0 ? 0 : e.byte - 1, col);
        std::string msg = e.what();
        const auto pos = msg.find("syntax error");
        throw ConfigError("JSON parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                          (pos == std::string::npos ? msg : msg.substr(pos)));
    }
}

json load_config_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::vector<std::string> config_violations(const json& config)
{
    std::vector<std::string> errors;
    if (!config.is_object()) return {"config: must be a JSON object"};
    if (!config.contains("experiment") || !config.at("experiment").is_string()) return {"experiment: required key missing"};
    const auto name = config.at("experiment").get<std::string>();
    bool known = false;
    for (const auto& n : experiment_names()) known = known || n == name;
    if (!known) {
        std::string list;
        for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
        return {"experiment: must be one of {" + list + "} (got \"" + name + "\")"};
    }
    const json normalized = check_object(schema_for(name), config, "", errors);
    if (errors.empty()) semantic_checks(normalized, errors);
    return errors;
}

json normalize_config(const json& config)
{
    const auto errors = config_violations(config);
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    std::vector<std::string> unused;
    return check_object(schema_for(config.at("experiment").get<std::string>()), config, "", unused);
}

std::string config_digest(const json& normalized)
{
    json c = normalized;
    // execution details that do not change results
    c.erase("workers");
    c.erase("out_dir");
    const std::string text = c.dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

rel::KernelSpec kernel_from_json(const json& k)
{
    rel::KernelSpec s;
    s.d_f = k.value("d_f", 1);
    s.d_g = k.value("d_g", 1);
    s.g0 = k.value("g0", 1.0);
    s.profile = k.value("profile", std::string("uniform")) == "cone_gaussian" ? rel::KernelProfile::cone_gaussian
                                                                             : rel::KernelProfile::uniform;
    s.s = k.value("s", 1.0);
    s.acausal_leak = k.value("acausal_leak", 0.0);
    s.leak_radius = k.value("leak_radius", 1);
    return s;
}

rel::RelConfig rel_config_from_json(const json& j)
{
    rel::RelConfig c;
    c.n_t = j.at("n_t").get<int>();
    c.n_x = j.at("n_x").get<int>();
    c.a_t = j.value("a_t", 1.0);
    c.a_x = j.value("a_x", 1.0);
    c.mu = j.at("mu").get<double>();
    c.r = j.at("r").get<double>();
    c.tier = j.value("tier", std::string("branch")) == "exact" ? rel::Tier::exact : rel::Tier::branch;
    c.hit_mode = j.value("hit_mode", std::string("clt")) == "enumerate" ? rel::HitMode::enumerate : rel::HitMode::clt;
    c.n_max = j.value("n_max", 4);
    c.dimension_cap = j.value("dimension_cap", std::size_t{4194304});
    c.threshold = j.value("threshold", 0.99);
    c.kernel = kernel_from_json(j.value("kernel", json::object()));
    c.amplitudes.clear();
    c.sources.clear();
    const auto& branches = j.at("branches");
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& b = branches[k];
        const json amp = b.value("amplitude", json(1.0));
        c.amplitudes.push_back(amp.is_number() ? cplx(amp.get<double>(), 0.0) : cplx(amp[0].get<double>(), amp[1].get<double>()));
        for (const auto& s : b.value("sources", json::array()))
            c.sources.push_back({k, s.at("x0").get<int>(), s.at("x1").get<int>(), s.at("J").get<double>(),
                                 s.value("t0", 0), s.value("t1", -1)});
    }
    for (const auto& h : j.value("hit_columns", json::array())) c.hit_columns.push_back({h[0].get<int>(), h[1].get<int>()});
    const json rows = j.value("hit_rows", json::array({0, -1}));
    c.hit_t0 = rows[0].get<int>();
    c.hit_t1 = rows[1].get<int>();
    return c;
}

}  // namespace collapse

#include "stlcbf/scenario.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace stlcbf {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg)
{
    throw ScenarioError("scenario", msg);
}

const json& need(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object() || !j.contains(key))
        fail(where + " is missing \"" + key + "\"");
    return j.at(key);
}

double num(const json& j, const std::string& where)
{
    if (!j.is_number())
        fail(where + " must be a number");
    return j.get<double>();
}

double num_or(const json& j, const char* key, double fallback, const std::string& where)
{
    return j.contains(key) ? num(j.at(key), where + "." + key) : fallback;
}

Eigen::VectorXd vec(const json& j, const std::string& where)
{
    if (!j.is_array())
        fail(where + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = num(j[i], where + "[" + std::to_string(i) + "]");
    return v;
}

Eigen::MatrixXd mat(const json& j, const std::string& where)
{
    if (!j.is_array() || j.empty())
        fail(where + " must be a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            fail(where + " rows must all have " + std::to_string(cols) + " entries");
        m.row(static_cast<Eigen::Index>(r)) = vec(j[r], where + "[" + std::to_string(r) + "]").transpose();
    }
    return m;
}

json to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v(i));
    return a;
}

json to_json(const Eigen::MatrixXd& m)
{
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        a.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
    return a;
}

// Selector from explicit matrix or from "indices" (and optional "minus_indices").
Eigen::MatrixXd selector_of(const json& j, Eigen::Index n, const std::string& where)
{
    if (j.contains("selector"))
        return mat(j.at("selector"), where + ".selector");
    if (!j.contains("indices"))
        return Eigen::MatrixXd::Identity(n, n);
    const auto idx = j.at("indices").get<std::vector<long>>();
    std::vector<long> minus;
    if (j.contains("minus_indices"))
        minus = j.at("minus_indices").get<std::vector<long>>();
    if (!minus.empty() && minus.size() != idx.size())
        fail(where + ".minus_indices must match indices in length");
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= n || (!minus.empty() && (minus[r] < 0 || minus[r] >= n)))
            fail(where + " selects a component outside the " + std::to_string(n) + "-dimensional state");
        s(static_cast<Eigen::Index>(r), idx[r]) += 1.0;
        if (!minus.empty())
            s(static_cast<Eigen::Index>(r), minus[r]) -= 1.0;
    }
    return s;
}

GammaParams gamma_of(const json& j, const std::string& where)
{
    if (!j.is_object())
        fail(where + " must be an object");
    GammaParams g;
    g.gamma_zero = num_or(j, "gamma_zero", 0.0, where);
    g.gamma_inf = num_or(j, "gamma_inf", 0.0, where);
    g.t_star = num_or(j, "t_star", 0.0, where);
    g.blend = num_or(j, "blend", 0.0, where);
    g.affine = j.value("affine", false);
    return g;
}

json gamma_json(const GammaParams& g)
{
    return json{{"gamma_zero", g.gamma_zero}, {"gamma_inf", g.gamma_inf}, {"t_star", g.t_star},
                {"blend", g.blend}, {"affine", g.affine}};
}

Eigen::Index dynamics_dim(const DynamicsSpec& d)
{
    if (d.type == "single_integrator")
        return d.n;
    if (d.type == "linear")
        return d.A.rows();
    return static_cast<Eigen::Index>(3 * d.team.agents());
}

Eigen::VectorXd bound_of(const json& j, Eigen::Index m, const std::string& where)
{
    if (j.is_number())
        return Eigen::VectorXd::Constant(m, j.get<double>());
    Eigen::VectorXd v = vec(j, where);
    if (v.size() != m)
        fail(where + " must have " + std::to_string(m) + " entries");
    return v;
}

}  // namespace

Scenario parse_scenario(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    try {
        Scenario s;
        s.name = j.value("name", std::string("scenario"));
        s.formula = need(j, "formula", "scenario").get<std::string>();

        const json& dj = need(j, "dynamics", "scenario");
        s.dynamics.type = need(dj, "type", "dynamics").get<std::string>();
        if (s.dynamics.type == "single_integrator") {
            s.dynamics.n = need(dj, "n", "dynamics").get<Eigen::Index>();
        } else if (s.dynamics.type == "linear") {
            s.dynamics.A = mat(need(dj, "A", "dynamics"), "dynamics.A");
            s.dynamics.B = mat(need(dj, "B", "dynamics"), "dynamics.B");
            s.dynamics.n = s.dynamics.A.rows();
        } else if (s.dynamics.type == "omni_robot_team") {
            s.dynamics.team.gains = need(dj, "gains", "dynamics").get<std::vector<double>>();
            s.dynamics.team.body_radius = num_or(dj, "body_radius", 0.2, "dynamics");
            s.dynamics.team.wheel_radius = num_or(dj, "wheel_radius", 0.02, "dynamics");
            s.dynamics.team.softening = num_or(dj, "softening", 1e-5, "dynamics");
            s.dynamics.n = static_cast<Eigen::Index>(3 * s.dynamics.team.gains.size());
        } else {
            fail("unknown dynamics type \"" + s.dynamics.type + "\"");
        }
        const Eigen::Index n = dynamics_dim(s.dynamics);
        if (n <= 0)
            fail("dynamics must have a positive state dimension");
        const Eigen::Index m = s.dynamics.type == "linear" ? s.dynamics.B.cols() : n;

        for (const json& pj : need(j, "predicates", "scenario")) {
            PredicateSpec p;
            p.id = need(pj, "id", "predicate").get<std::string>();
            p.type = need(pj, "type", "predicate " + p.id).get<std::string>();
            const std::string where = "predicate " + p.id;
            if (p.type == "ball2" || p.type == "box_inf") {
                p.selector = selector_of(pj, n, where);
                p.center = vec(need(pj, "center", where), where + ".center");
                p.radius = num(need(pj, "radius", where), where + ".radius");
            } else if (p.type == "affine") {
                p.a = vec(need(pj, "a", where), where + ".a");
                p.d = num(need(pj, "d", where), where + ".d");
            } else {
                fail(where + " has unknown type \"" + p.type + "\"");
            }
            s.predicates.push_back(std::move(p));
        }

        for (std::size_t i = 0; i < need(j, "gamma", "scenario").size(); ++i) {
            const json& gj = j.at("gamma")[i];
            const std::string where = "gamma[" + std::to_string(i) + "]";
            GammaEntry e;
            if (gj.contains("always") || gj.contains("eventually")) {
                e.until = true;
                e.always = gamma_of(need(gj, "always", where), where + ".always");
                e.eventually = gamma_of(need(gj, "eventually", where), where + ".eventually");
                if (gj.contains("witness"))
                    e.witness = num(gj.at("witness"), where + ".witness");
            } else {
                e.params = gamma_of(gj, where);
            }
            s.gamma.push_back(e);
        }

        const json& cj = need(j, "control", "scenario");
        s.control.Q = cj.contains("Q") ? mat(cj.at("Q"), "control.Q") : Eigen::MatrixXd::Identity(m, m);
        s.control.kappa = num(need(cj, "kappa", "control"), "control.kappa");
        s.control.b_min = num(need(cj, "b_min", "control"), "control.b_min");
        s.control.tol = num_or(cj, "tol", 1e-7, "control");
        s.control.lower = Eigen::VectorXd::Constant(m, -1e6);
        s.control.upper = Eigen::VectorXd::Constant(m, 1e6);
        if (cj.contains("input_lower"))
            s.control.lower = bound_of(cj.at("input_lower"), m, "control.input_lower");
        if (cj.contains("input_upper"))
            s.control.upper = bound_of(cj.at("input_upper"), m, "control.input_upper");
        s.control.parallel = cj.value("parallel", false);

        const json& rj = need(j, "run", "scenario");
        s.run.t0 = num_or(rj, "t0", 0.0, "run");
        s.run.t_end = num(need(rj, "t_end", "run"), "run.t_end");
        if (rj.contains("x0"))
            s.run.x0 = vec(rj.at("x0"), "run.x0");
        s.run.rate = num_or(rj, "rate", 50.0, "run");
        s.run.integrator = rj.value("integrator", std::string("rk4"));
        s.run.substeps = rj.value("substeps", 10);

        if (j.contains("initial_box")) {
            const json& bj = j.at("initial_box");
            s.initial_box = BoxSpec{vec(need(bj, "lo", "initial_box"), "initial_box.lo"),
                                    vec(need(bj, "hi", "initial_box"), "initial_box.hi")};
        }
        if (s.run.x0.size() == 0 && !s.initial_box)
            fail("run.x0 or initial_box is required");

        if (j.contains("sampler")) {
            const json& sj = j.at("sampler");
            SamplerSpec sp;
            sp.lo = vec(need(sj, "lo", "sampler"), "sampler.lo");
            sp.hi = vec(need(sj, "hi", "sampler"), "sampler.hi");
            sp.states = sj.value("states", std::size_t{1000});
            sp.times = sj.value("times", std::vector<double>{});
            sp.ascent_starts = sj.value("ascent_starts", std::size_t{0});
            sp.seed = sj.value("seed", std::uint64_t{1});
            s.sampler = sp;
        }
        return s;
    } catch (const json::exception& e) {
        fail(std::string("malformed field: ") + e.what());
    }
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string dump_scenario(const Scenario& s)
{
    json j;
    j["name"] = s.name;
    j["formula"] = s.formula;
    j["predicates"] = json::array();
    for (const auto& p : s.predicates) {
        json pj{{"id", p.id}, {"type", p.type}};
        if (p.type == "affine") {
            pj["a"] = to_json(p.a);
            pj["d"] = p.d;
        } else {
            pj["selector"] = to_json(p.selector);
            pj["center"] = to_json(p.center);
            pj["radius"] = p.radius;
        }
        j["predicates"].push_back(pj);
    }
    j["gamma"] = json::array();
    for (const auto& g : s.gamma) {
        if (g.until) {
            json gj{{"always", gamma_json(g.always)}, {"eventually", gamma_json(g.eventually)}};
            if (g.witness)
                gj["witness"] = *g.witness;
            j["gamma"].push_back(gj);
        } else {
            j["gamma"].push_back(gamma_json(g.params));
        }
    }
    json dj{{"type", s.dynamics.type}};
    if (s.dynamics.type == "single_integrator") {
        dj["n"] = s.dynamics.n;
    } else if (s.dynamics.type == "linear") {
        dj["A"] = to_json(s.dynamics.A);
        dj["B"] = to_json(s.dynamics.B);
    } else {
        dj["gains"] = s.dynamics.team.gains;
        dj["body_radius"] = s.dynamics.team.body_radius;
        dj["wheel_radius"] = s.dynamics.team.wheel_radius;
        dj["softening"] = s.dynamics.team.softening;
    }
    j["dynamics"] = dj;
    j["control"] = json{{"Q", to_json(s.control.Q)},
                        {"kappa", s.control.kappa},
                        {"b_min", s.control.b_min},
                        {"tol", s.control.tol},
                        {"input_lower", to_json(s.control.lower)},
                        {"input_upper", to_json(s.control.upper)},
                        {"parallel", s.control.parallel}};
    json rj{{"t0", s.run.t0},
            {"t_end", s.run.t_end},
            {"rate", s.run.rate},
            {"integrator", s.run.integrator},
            {"substeps", s.run.substeps}};
    if (s.run.x0.size())
        rj["x0"] = to_json(s.run.x0);
    j["run"] = rj;
    if (s.initial_box)
        j["initial_box"] = json{{"lo", to_json(s.initial_box->lo)}, {"hi", to_json(s.initial_box->hi)}};
    if (s.sampler)
        j["sampler"] = json{{"lo", to_json(s.sampler->lo)},
                            {"hi", to_json(s.sampler->hi)},
                            {"states", s.sampler->states},
                            {"times", s.sampler->times},
                            {"ascent_starts", s.sampler->ascent_starts},
                            {"seed", s.sampler->seed}};
    return j.dump(2) + "\n";
}

void save_scenario(const Scenario& s, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        fail("cannot write " + path);
    out << dump_scenario(s);
}

CompiledScenario compile_scenario(const Scenario& s)
{
    CompiledScenario c;
    const Eigen::Index n = dynamics_dim(s.dynamics);
    try {
        for (const auto& p : s.predicates) {
            if (p.type == "ball2")
                c.registry.add(Predicate(p.id, Ball2{p.selector, p.center, p.radius}));
            else if (p.type == "affine")
                c.registry.add(Predicate(p.id, Affine{p.a, p.d}));
            else
                c.registry.add_box_inf(p.id, BoxInf{p.selector, p.center, p.radius});
        }
    } catch (const std::exception& e) {
        throw ScenarioError("predicates", e.what());
    }
    if (c.registry.state_dim() != n)
        throw ScenarioError("predicates", "predicates act on dimension " + std::to_string(c.registry.state_dim()) +
                                              " but the dynamics have " + std::to_string(n) + " states");

    try {
        c.formula = parse_formula(s.formula, c.registry);
    } catch (const std::exception& e) {
        throw ScenarioError("parse", e.what());
    }

    const auto temporal = temporal_nodes(c.formula);
    if (temporal.size() != s.gamma.size())
        throw ScenarioError("gamma", "formula has " + std::to_string(temporal.size()) +
                                         " temporal operators but " + std::to_string(s.gamma.size()) +
                                         " gamma entries are given");
    WitnessPolicy policy;
    std::vector<GammaParams> gammas;
    std::size_t until_index = 0;
    for (std::size_t i = 0; i < temporal.size(); ++i) {
        const bool is_until = temporal[i]->kind == NodeKind::Until;
        if (is_until != s.gamma[i].until)
            throw ScenarioError("gamma", "gamma[" + std::to_string(i) + "] must " + (is_until ? "" : "not ") +
                                             "have always/eventually parts");
        if (is_until) {
            if (s.gamma[i].witness)
                policy.overrides[until_index] = *s.gamma[i].witness;
            ++until_index;
            gammas.push_back(s.gamma[i].always);
            gammas.push_back(s.gamma[i].eventually);
        } else {
            gammas.push_back(s.gamma[i].params);
        }
    }
    try {
        c.desugared = desugar_until(c.formula, policy);
    } catch (const std::exception& e) {
        throw ScenarioError("desugar", e.what());
    }
    try {
        c.tree = BfTree::build(c.desugared, c.registry, gammas, TreeOptions{s.run.t0, s.run.t_end});
    } catch (const std::exception& e) {
        throw ScenarioError("tree", e.what());
    }

    try {
        if (s.dynamics.type == "single_integrator")
            c.dynamics = single_integrator(s.dynamics.n);
        else if (s.dynamics.type == "linear")
            c.dynamics = linear_system(s.dynamics.A, s.dynamics.B);
        else
            c.dynamics = s.dynamics.team.as_dynamics();

        c.control.Q = s.control.Q;
        c.control.kappa = s.control.kappa;
        c.control.b_min = s.control.b_min;
        c.control.tol = s.control.tol;
        c.control.lower = s.control.lower;
        c.control.upper = s.control.upper;
        c.control.exec = s.control.parallel ? Exec::Parallel : Exec::Serial;
        c.control.validate(c.dynamics.m);
    } catch (const std::exception& e) {
        throw ScenarioError("control", e.what());
    }

    if (s.run.integrator != "rk4" && s.run.integrator != "euler")
        throw ScenarioError("run", "integrator must be \"rk4\" or \"euler\"");
    c.sim.rate = s.run.rate;
    c.sim.integrator = s.run.integrator == "rk4" ? Integrator::RK4 : Integrator::Euler;
    c.sim.substeps = s.run.substeps;
    if (!(c.sim.rate > 0.0) || c.sim.substeps <= 0)
        throw ScenarioError("run", "rate and substeps must be positive");
    if (s.run.x0.size() && s.run.x0.size() != n)
        throw ScenarioError("run", "x0 must have " + std::to_string(n) + " entries");
    if (s.initial_box && (s.initial_box->lo.size() != n || s.initial_box->hi.size() != n))
        throw ScenarioError("run", "initial_box bounds must have " + std::to_string(n) + " entries");

    if (s.sampler) {
        if (s.sampler->lo.size() != n || s.sampler->hi.size() != n)
            throw ScenarioError("sampler", "sampler bounds must have " + std::to_string(n) + " entries");
        Sampler sp;
        sp.lo = s.sampler->lo;
        sp.hi = s.sampler->hi;
        sp.states = s.sampler->states;
        sp.times = s.sampler->times;
        sp.ascent_starts = s.sampler->ascent_starts;
        sp.seed = s.sampler->seed;
        c.sampler = sp;
    }
    return c;
}

Eigen::VectorXd initial_state(const Scenario& s, const CompiledScenario& c, std::uint64_t seed)
{
    if (s.run.x0.size())
        return s.run.x0;
    Sampler box;
    box.lo = s.initial_box->lo;
    box.hi = s.initial_box->hi;
    box.seed = seed;
    const History hist = c.tree.make_history();
    for (std::uint64_t stream = 0; stream < 10000; ++stream) {
        const Eigen::VectorXd x = box.draw_states(1, stream).col(0);
        if (c.tree.eval_root(s.run.t0, x, hist) > 0.0)
            return x;
    }
    throw ScenarioError("run", "no initial state with b_0 > 0 found in initial_box");
}

}  // namespace stlcbf

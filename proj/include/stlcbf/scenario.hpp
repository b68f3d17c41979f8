#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/dynamics.hpp"
#include "stlcbf/predicate.hpp"
#include "stlcbf/sim.hpp"
#include "stlcbf/stl_ast.hpp"

namespace stlcbf {

/// Error in one pipeline stage; `stage` names it ("scenario", "parse", "tree", ...).
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string stage, const std::string& msg)
        : std::runtime_error(stage + ": " + msg), stage(std::move(stage))
    {
    }
    std::string stage;
};

struct PredicateSpec {
    std::string id;
    /// "ball2", "affine" or "box_inf".
    std::string type;
    Eigen::MatrixXd selector;
    Eigen::VectorXd center;
    double radius = 0.0;
    Eigen::VectorXd a;
    double d = 0.0;
};

/// Funnel parameters of one temporal operator in text order. An Until
/// operator carries a witness time and one funnel for each half of its rewrite.
struct GammaEntry {
    bool until = false;
    GammaParams params;
    std::optional<double> witness;
    GammaParams always;
    GammaParams eventually;
};

struct DynamicsSpec {
    /// "single_integrator", "linear" or "omni_robot_team".
    std::string type;
    Eigen::Index n = 0;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    OmniRobotTeam team;
};

struct ControlSpec {
    Eigen::MatrixXd Q;
    double kappa = 1.0;
    double b_min = 1.0;
    double tol = 1e-7;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    bool parallel = false;
};

struct RunSpec {
    double t0 = 0.0;
    double t_end = 1.0;
    /// Empty when the initial state is drawn from `initial_box`.
    Eigen::VectorXd x0;
    double rate = 50.0;
    std::string integrator = "rk4";
    int substeps = 10;
};

struct BoxSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

struct SamplerSpec {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::size_t states = 1000;
    std::vector<double> times;
    std::size_t ascent_starts = 0;
    std::uint64_t seed = 1;
};

struct Scenario {
    std::string name;
    std::string formula;
    std::vector<PredicateSpec> predicates;
    std::vector<GammaEntry> gamma;
    DynamicsSpec dynamics;
    ControlSpec control;
    RunSpec run;
    std::optional<BoxSpec> initial_box;
    std::optional<SamplerSpec> sampler;
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
/// Normalized JSON (selectors expanded, every field explicit).
std::string dump_scenario(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

struct CompiledScenario {
    PredicateRegistry registry;
    Formula formula;
    Formula desugared;
    BfTree tree;
    Dynamics dynamics;
    ControlConfig control;
    SimOptions sim;
    std::optional<Sampler> sampler;
};

/// parse -> desugar -> build tree, plus dynamics and controller settings.
/// Every failure is reported as a ScenarioError naming its stage.
CompiledScenario compile_scenario(const Scenario& s);

/// Initial state: run.x0 if given, otherwise the first draw from
/// initial_box (seeded) with b_0(t0, x0) > 0.
Eigen::VectorXd initial_state(const Scenario& s, const CompiledScenario& c, std::uint64_t seed);

}  // namespace stlcbf

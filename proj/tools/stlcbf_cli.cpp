#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stlcbf/artifacts.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/monitor.hpp"
#include "stlcbf/scenario.hpp"
#include "stlcbf/sim.hpp"

using namespace stlcbf;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitAssumption = 2;
constexpr int kExitInfeasible = 3;

struct RunArgs {
    std::string scenario;
    std::string out;
    double rate = 0.0;
    bool force = false;
    bool check_only = false;
    std::uint64_t seed = 1;
    bool seed_given = false;
};

void print_report(const AssumptionReport& rep)
{
    const auto& a = rep.kappa_gate;
    std::printf("kappa gate: kappa*b_min = %s, max decrease rate = %s, margin = %s -> %s\n",
                format_number(a.lhs).c_str(), format_number(a.rhs).c_str(), format_number(a.margin).c_str(),
                a.pass ? "pass" : "FAIL");
    for (const auto& p : rep.predicates)
        std::printf("predicate %s: %zu samples, %zu concavity violations, %zu first-order violations\n",
                    p.id.c_str(), p.samples, p.concavity_violations, p.first_order_violations);
    if (rep.b_min_estimate)
        std::printf("sampled b_min estimate: %s\n", format_number(*rep.b_min_estimate).c_str());
    for (const auto& w : rep.warnings)
        std::printf("warning: %s\n", w.c_str());
}

int run(const RunArgs& args)
{
    Scenario sc;
    CompiledScenario cs;
    try {
        sc = load_scenario(args.scenario);
        if (args.rate > 0.0)
            sc.run.rate = args.rate;
        if (args.seed_given && sc.sampler)
            sc.sampler->seed = args.seed;
        cs = compile_scenario(sc);
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "error [%s]\n", e.what());
        return kExitUsage;
    }
    std::printf("scenario %s: %zu tree nodes, %zu leaves, horizon %s\n", sc.name.c_str(), cs.tree.size(),
                cs.tree.elementary().size(), format_number(cs.tree.horizon()).c_str());

    const AssumptionReport rep = check_assumptions(cs.tree, cs.control, cs.dynamics, cs.sampler);
    print_report(rep);
    if (!rep.pass() && !args.force) {
        std::fprintf(stderr, "error [assumptions]: check failed (use --force to run anyway)\n");
        return kExitAssumption;
    }
    if (args.check_only)
        return 0;

    Eigen::VectorXd x0;
    try {
        x0 = initial_state(sc, cs, args.seed);
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "error [%s]\n", e.what());
        return kExitUsage;
    }

    Trajectory traj;
    try {
        traj = simulate(cs.dynamics, cs.tree, cs.control, sc.run.t0, x0, sc.run.t_end, cs.sim);
    } catch (const ControllerError& e) {
        std::fprintf(stderr, "error [simulate]: %s\n", e.what());
        for (const auto& c : e.candidates)
            std::fprintf(stderr, "  leaf %s: infeasible, certificate norm %s\n", cs.tree.node(c.k).label.c_str(),
                         format_number(c.certificate.norm()).c_str());
        return kExitInfeasible;
    } catch (const SimError& e) {
        std::fprintf(stderr, "error [simulate]: %s\n", e.what());
        return kExitInfeasible;
    }

    const Theorem1Report th = check_theorem1(traj, cs.tree, cs.formula, cs.registry);
    std::printf("min b0 = %s at t = %s\n", format_number(th.min_b0).c_str(), format_number(th.min_b0_time).c_str());
    std::printf("robustness = %s (sampling tolerance %s)\n", format_number(th.robustness).c_str(),
                format_number(th.tol_sampling).c_str());
    std::printf("implication: %s\n", to_string(th.verdict).c_str());
    std::printf("mean controller time per tick = %.3f ms\n", 1e3 * traj.mean_controller_seconds());

    const std::string out = args.out.empty() ? "out/" + sc.name : args.out;
    try {
        std::filesystem::create_directories(out);
        write_trajectory_csv(traj, cs.tree, out + "/trajectory.csv");
        write_barrier_csv(traj, out + "/barrier.csv");
        write_inputs_csv(traj, out + "/inputs.csv");
        const std::size_t agents = sc.dynamics.type == "omni_robot_team" ? sc.dynamics.team.agents() : 0;
        emit_plots(traj, out, agents);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error [artifacts]: %s\n", e.what());
        return kExitUsage;
    }
    std::printf("artifacts written to %s\n", out.c_str());
    return 0;
}

int monitor(const std::string& scenario, const std::string& csv)
{
    try {
        const Scenario sc = load_scenario(scenario);
        const CompiledScenario cs = compile_scenario(sc);
        const Trajectory traj = read_trajectory_csv(csv);
        const Theorem1Report th = check_theorem1(traj, cs.tree, cs.formula, cs.registry);
        std::printf("min b0 = %s at t = %s\n", format_number(th.min_b0).c_str(),
                    format_number(th.min_b0_time).c_str());
        std::printf("robustness = %s (sampling tolerance %s)\n", format_number(th.robustness).c_str(),
                    format_number(th.tol_sampling).c_str());
        std::printf("implication: %s\n", to_string(th.verdict).c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Compile STL tasks into barrier-function controllers and simulate them"};
    app.require_subcommand(1);

    RunArgs args;
    auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write CSV/SVG artifacts");
    run_cmd->add_option("scenario", args.scenario, "scenario JSON file")->required();
    run_cmd->add_option("--out", args.out, "output directory (default out/<name>)");
    run_cmd->add_option("--rate", args.rate, "control rate in Hz (overrides the scenario)");
    run_cmd->add_flag("--force", args.force, "simulate even if the assumption check fails");
    run_cmd->add_flag("--check-only", args.check_only, "stop after the assumption check");
    auto* seed_opt = run_cmd->add_option("--seed", args.seed, "seed for sampling and random initial states");

    std::string mon_scenario, mon_csv;
    auto* mon_cmd = app.add_subcommand("monitor", "check a recorded trajectory CSV against a scenario");
    mon_cmd->add_option("scenario", mon_scenario, "scenario JSON file")->required();
    mon_cmd->add_option("trajectory", mon_csv, "trajectory CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    args.seed_given = seed_opt->count() > 0;
    if (*run_cmd)
        return run(args);
    return monitor(mon_scenario, mon_csv);
}

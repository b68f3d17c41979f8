#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/dynamics.hpp"

namespace stlcbf {

enum class Integrator { Euler, RK4 };

struct SimOptions {
    /// Control rate in Hz; the input is held constant between ticks.
    double rate = 50.0;
    Integrator integrator = Integrator::RK4;
    int substeps = 10;
};

/// One record per control tick: the state at the tick, the input held over
/// the following interval, b_0 at the tick and the section that was chosen.
struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;
    std::vector<double> b0;
    std::vector<std::optional<NodeIndex>> chosen;
    /// Feasible candidates / candidates per tick.
    std::vector<std::pair<int, int>> candidate_status;
    /// Wall-clock seconds spent in the controller per tick.
    std::vector<double> controller_seconds;

    std::size_t size() const { return t.size(); }
    bool empty() const { return t.empty(); }
    double mean_controller_seconds() const;
};

class SimError : public std::runtime_error {
public:
    SimError(const std::string& msg, double t, Eigen::VectorXd x) : std::runtime_error(msg), t(t), x(std::move(x)) {}
    double t;
    Eigen::VectorXd x;
};

/// One ZOH interval of length dt, integrated in `substeps` steps.
Eigen::VectorXd integrate_interval(const Dynamics& dyn, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                   double dt, Integrator integrator, int substeps);

/// Closed loop on [t0, t_end]. Each tick updates the disjunction history with
/// the pre-update state, computes the input and integrates. ControllerError
/// propagates unchanged; an initial state with b0 < 0 or a non-finite state
/// raises SimError.
Trajectory simulate(const Dynamics& dyn, const BfTree& tree, const ControlConfig& cfg, double t0,
                    const Eigen::VectorXd& x0, double t_end, const SimOptions& opts = {});

struct RunOutcome {
    Trajectory trajectory;
    bool ok = false;
    std::string error;
};

/// Independent closed-loop runs, one per initial state.
std::vector<RunOutcome> simulate_batch(const Dynamics& dyn, const BfTree& tree, const ControlConfig& cfg, double t0,
                                       const std::vector<Eigen::VectorXd>& x0s, double t_end,
                                       const SimOptions& opts, Exec exec);

}  // namespace stlcbf

#pragma once

#include <stdexcept>
#include <string>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/predicate.hpp"
#include "stlcbf/sim.hpp"
#include "stlcbf/stl_ast.hpp"

namespace stlcbf {

class MonitorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BarrierMin {
    double value = 0.0;
    double time = 0.0;
};

/// Minimum of b_0 along the trajectory. The disjunction history is replayed
/// from the samples; `interior` extra points per interval are evaluated on
/// the straight line between consecutive samples.
BarrierMin min_barrier(const Trajectory& traj, const BfTree& tree, int interior = 3, double tol_rel = 1e-7);

enum class Verdict { Satisfied, Violated, Boundary };

struct RobustnessResult {
    double value = 0.0;
    Verdict verdict = Verdict::Boundary;
};

/// Discrete-time max/min robustness of `formula` at time t over the sample
/// grid. Until is evaluated from its own semantics. Throws MonitorError when
/// a window leaves the trace.
RobustnessResult stl_robustness(const Trajectory& traj, const Formula& formula, const PredicateRegistry& registry,
                                double t = 0.0, double tol = 0.0);

/// Largest change of any predicate of `formula` between consecutive samples.
double sampling_tolerance(const Trajectory& traj, const Formula& formula, const PredicateRegistry& registry);

enum class ImplicationVerdict { Holds, Vacuous, Counterexample };

struct Theorem1Report {
    double min_b0 = 0.0;
    double min_b0_time = 0.0;
    double robustness = 0.0;
    double tol_sampling = 0.0;
    ImplicationVerdict verdict = ImplicationVerdict::Vacuous;
};

/// min b_0 >= 0 must imply robustness >= -tol_sampling. The converse is not
/// checked.
Theorem1Report check_theorem1(const Trajectory& traj, const BfTree& tree, const Formula& formula,
                              const PredicateRegistry& registry);

std::string to_string(Verdict v);
std::string to_string(ImplicationVerdict v);

}  // namespace stlcbf

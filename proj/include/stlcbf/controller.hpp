#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/dynamics.hpp"
#include "stlcbf/qp.hpp"

namespace stlcbf {

/// Execution policy for the data-parallel kernels.
enum class Exec { Serial, Parallel };

struct ControlConfig {
    Eigen::MatrixXd Q;
    /// alpha(s) = kappa * s.
    double kappa = 1.0;
    /// Relative activity tolerance for the index sets.
    double tol = 1e-7;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    /// Lower bound on b_0 at its local maxima (scenario supplied).
    double b_min = 1.0;
    Exec exec = Exec::Serial;

    /// Q = I and bounds of +-1e6.
    static ControlConfig defaults(Eigen::Index m);
    /// Throws std::invalid_argument on a malformed configuration.
    void validate(Eigen::Index m) const;
};

struct CandidateResult {
    NodeIndex k = 0;
    QpStatus status = QpStatus::Infeasible;
    /// Empty when infeasible.
    Eigen::VectorXd u;
    /// u^T Q u, +inf when infeasible.
    double objective = kInf;
    /// Farkas certificate of an infeasible QP.
    Eigen::VectorXd certificate;
    std::size_t switching_rows = 0;

    bool feasible() const { return status == QpStatus::Optimal; }
};

struct ControlResult {
    Eigen::VectorXd u;
    std::optional<NodeIndex> chosen;
    double objective = 0.0;
    double b0 = 0.0;
    bool beyond_horizon = false;
    std::vector<CandidateResult> candidates;
};

/// Every candidate QP was infeasible.
class ControllerError : public std::runtime_error {
public:
    ControllerError(const std::string& msg, double t, Eigen::VectorXd x, std::vector<CandidateResult> cands)
        : std::runtime_error(msg), t(t), x(std::move(x)), candidates(std::move(cands))
    {
    }
    double t;
    Eigen::VectorXd x;
    std::vector<CandidateResult> candidates;
};

/// The QP of section k: the gradient row of b_0^k and one switching row per
/// other active leaf. `sets` must come from the same (t, x, hist).
QpProblem candidate_problem(NodeIndex k, double t, const Eigen::VectorXd& x, const BfTree& tree,
                            const History& hist, const IndexSets& sets, const Dynamics& dyn,
                            const ControlConfig& cfg);

CandidateResult candidate_input(NodeIndex k, double t, const Eigen::VectorXd& x, const BfTree& tree,
                                const History& hist, const Dynamics& dyn, const ControlConfig& cfg);

/// Solves every candidate and applies the one with least cost; ties within
/// 1e-9 go to the smallest leaf index. Returns u = 0 past the horizon.
ControlResult control_input(double t, const Eigen::VectorXd& x, const BfTree& tree, const History& hist,
                            const Dynamics& dyn, const ControlConfig& cfg);

/// State box and time grid used by the sampled checks.
struct Sampler {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::size_t states = 1000;
    std::vector<double> times;
    std::uint64_t seed = 1;
    /// Starting points per time for the local-maximum search (0 disables it).
    std::size_t ascent_starts = 0;

    Eigen::MatrixXd draw_states(std::size_t count, std::uint64_t stream) const;
};

struct KappaGate {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    bool pass = false;
    /// Node and time attaining the largest decrease rate.
    std::string worst_node;
    double worst_time = 0.0;
};

struct PredicateCheck {
    std::string id;
    std::size_t samples = 0;
    std::size_t concavity_violations = 0;
    std::size_t first_order_violations = 0;
};

struct AssumptionReport {
    KappaGate kappa_gate;
    std::vector<PredicateCheck> predicates;
    std::optional<double> b_min_estimate;
    std::vector<std::string> warnings;

    bool pass() const;
};

/// kappa * b_min > max over temporal nodes and t in [t1, min(beta_i, t2)] of
/// -gamma_i'(t), evaluated in closed form.
KappaGate check_kappa_gate(const BfTree& tree, const ControlConfig& cfg);

AssumptionReport check_assumptions(const BfTree& tree, const ControlConfig& cfg, const Dynamics& dyn,
                                   const std::optional<Sampler>& sampler);

}  // namespace stlcbf

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/qp.hpp"

namespace stlcbf {

/// b_0(ts[j], xs.col(j)) for every column. Serial and parallel variants give
/// identical results.
std::vector<double> batch_eval_root(const BfTree& tree, const History& hist, const std::vector<double>& ts,
                                    const Eigen::MatrixXd& xs, Exec exec);

std::vector<QpSolution> solve_qp_batch(const std::vector<QpProblem>& problems, Exec exec);

struct LocalMax {
    double t = 0.0;
    Eigen::VectorXd x;
    double value = 0.0;
};

/// Derivative-free ascent of x -> b_0(t, x) from every column of `starts`.
/// Coordinate and pairwise-diagonal directions, then the steepest ascent
/// direction of the near-active leaves; step halved when all fail.
std::vector<LocalMax> batch_local_maxima(const BfTree& tree, const History& hist, double t,
                                         const Eigen::MatrixXd& starts, double initial_step, Exec exec);

/// Smallest local-maximum value found over the sampler's times (t <= horizon).
std::optional<double> estimate_b_min(const BfTree& tree, const Sampler& sampler, Exec exec);

}  // namespace stlcbf

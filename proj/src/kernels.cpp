#include "stlcbf/kernels.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "parallel.hpp"

namespace stlcbf {

namespace {

std::vector<Eigen::VectorXd> ascent_directions(Eigen::Index n)
{
    std::vector<Eigen::VectorXd> dirs;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (double s : {1.0, -1.0}) {
            Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
            d(i) = s;
            dirs.push_back(d);
        }
    }
    const double r = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            for (double si : {1.0, -1.0}) {
                for (double sj : {1.0, -1.0}) {
                    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
                    d(i) = si * r;
                    d(j) = sj * r;
                    dirs.push_back(d);
                }
            }
        }
    }
    return dirs;
}

// Steepest ascent of the min over the leaves that are active within `tol`:
// the min-norm d with grad_k . d >= 1 for every such leaf. Empty when 0 lies
// in their convex hull.
std::optional<Eigen::VectorXd> hull_direction(const BfTree& tree, const History& hist, double t,
                                              const Eigen::VectorXd& x, double tol)
{
    const IndexSets sets = tree.active_sets(t, x, hist, tol);
    const auto& act = sets.root_active_elementary();
    if (act.empty())
        return std::nullopt;
    const Eigen::Index n = x.size();
    QpProblem pb;
    pb.Q = Eigen::MatrixXd::Identity(n, n);
    pb.A.resize(static_cast<Eigen::Index>(act.size()), n);
    pb.c = Eigen::VectorXd::Ones(pb.A.rows());
    for (std::size_t r = 0; r < act.size(); ++r)
        pb.A.row(static_cast<Eigen::Index>(r)) = tree.eval_bk(act[r], t, x, hist).grad_x.transpose();
    const QpSolution sol = solve_qp(pb);
    if (sol.status != QpStatus::Optimal || !(sol.u.norm() > 0.0))
        return std::nullopt;
    return Eigen::VectorXd(sol.u.normalized());
}

}  // namespace

std::vector<double> batch_eval_root(const BfTree& tree, const History& hist, const std::vector<double>& ts,
                                    const Eigen::MatrixXd& xs, Exec exec)
{
    if (static_cast<Eigen::Index>(ts.size()) != xs.cols())
        throw std::invalid_argument("batch evaluation needs one time per state column");
    std::vector<double> out(ts.size());
    detail::for_each_index(ts.size(), exec, [&](std::size_t j) {
        out[j] = tree.eval_root(ts[j], xs.col(static_cast<Eigen::Index>(j)), hist);
    });
    return out;
}

std::vector<QpSolution> solve_qp_batch(const std::vector<QpProblem>& problems, Exec exec)
{
    std::vector<QpSolution> out(problems.size());
    detail::for_each_index(problems.size(), exec, [&](std::size_t j) { out[j] = solve_qp(problems[j]); });
    return out;
}

std::vector<LocalMax> batch_local_maxima(const BfTree& tree, const History& hist, double t,
                                         const Eigen::MatrixXd& starts, double initial_step, Exec exec)
{
    if (!(initial_step > 0.0))
        throw std::invalid_argument("ascent step must be positive");
    const auto dirs = ascent_directions(starts.rows());
    const double min_step = 1e-7 * initial_step;
    std::vector<LocalMax> out(static_cast<std::size_t>(starts.cols()));
    detail::for_each_index(out.size(), exec, [&](std::size_t j) {
        Eigen::VectorXd x = starts.col(static_cast<Eigen::Index>(j));
        double v = tree.eval_root(t, x, hist);
        double step = initial_step;
        int evals = 0;
        while (step > min_step && evals < 200000) {
            bool moved = false;
            for (const auto& d : dirs) {
                const Eigen::VectorXd y = x + step * d;
                const double w = tree.eval_root(t, y, hist);
                ++evals;
                if (w > v) {
                    x = y;
                    v = w;
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                // stuck on a kink: leaves within reach of one step count as active
                const IndexSets sets0 = tree.active_sets(t, x, hist, 0.0);
                const auto& act0 = sets0.root_active_elementary();
                const double gnorm = act0.empty() ? 0.0 : tree.eval_bk(act0.front(), t, x, hist).grad_x.norm();
                const double tol = std::max(1e-9, step * gnorm / (1.0 + std::abs(v)));
                if (const auto d = hull_direction(tree, hist, t, x, tol)) {
                    const Eigen::VectorXd y = x + step * *d;
                    const double w = tree.eval_root(t, y, hist);
                    ++evals;
                    if (w > v) {
                        x = y;
                        v = w;
                        moved = true;
                    }
                }
            }
            if (!moved)
                step *= 0.5;
        }
        out[j] = LocalMax{t, x, v};
    });
    return out;
}

std::optional<double> estimate_b_min(const BfTree& tree, const Sampler& sampler, Exec exec)
{
    if (sampler.ascent_starts == 0)
        return std::nullopt;
    const double span = (sampler.hi - sampler.lo).maxCoeff();
    const History hist = tree.make_history();
    std::optional<double> best;
    std::uint64_t stream = 1000;
    for (double t : sampler.times) {
        if (t > tree.horizon())
            continue;
        const Eigen::MatrixXd starts = sampler.draw_states(sampler.ascent_starts, stream++);
        for (const LocalMax& lm : batch_local_maxima(tree, hist, t, starts, 0.1 * span, exec)) {
            if (!best || lm.value < *best)
                best = lm.value;
        }
    }
    return best;
}

}  // namespace stlcbf

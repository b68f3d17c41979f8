#include "stlcbf/controller.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stlcbf/kernels.hpp"

namespace stlcbf {

ControlConfig ControlConfig::defaults(Eigen::Index m)
{
    ControlConfig c;
    c.Q = Eigen::MatrixXd::Identity(m, m);
    c.lower = Eigen::VectorXd::Constant(m, -1e6);
    c.upper = Eigen::VectorXd::Constant(m, 1e6);
    return c;
}

void ControlConfig::validate(Eigen::Index m) const
{
    if (Q.rows() != m || Q.cols() != m)
        throw std::invalid_argument("cost matrix must be " + std::to_string(m) + "x" + std::to_string(m));
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw std::invalid_argument("kappa must be positive and finite");
    if (!(tol >= 0.0) || !std::isfinite(tol))
        throw std::invalid_argument("activity tolerance must be nonnegative");
    if (!(b_min > 0.0) || !std::isfinite(b_min))
        throw std::invalid_argument("b_min must be positive");
    if ((lower.size() != 0 && lower.size() != m) || (upper.size() != 0 && upper.size() != m))
        throw std::invalid_argument("input bounds must have " + std::to_string(m) + " entries");
    Eigen::LLT<Eigen::MatrixXd> llt(Q);
    if (llt.info() != Eigen::Success || (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.norm()))
        throw std::invalid_argument("cost matrix must be symmetric positive definite");
}

QpProblem candidate_problem(NodeIndex k, double t, const Eigen::VectorXd& x, const BfTree& tree,
                            const History& hist, const IndexSets& sets, const Dynamics& dyn,
                            const ControlConfig& cfg)
{
    const auto& act = sets.root_active_elementary();
    if (!std::binary_search(act.begin(), act.end(), k))
        throw std::invalid_argument("leaf " + tree.node(k).label + " is not in the active elementary set");

    const Eigen::VectorXd f = dyn.f(x);
    const Eigen::MatrixXd g = dyn.g(x);
    const double b0 = sets.root_value();

    QpProblem pb;
    pb.Q = cfg.Q;
    pb.lower = cfg.lower;
    pb.upper = cfg.upper;
    pb.A.resize(static_cast<Eigen::Index>(act.size()), dyn.m);
    pb.c.resize(static_cast<Eigen::Index>(act.size()));

    const BranchValue bk = tree.eval_bk(k, t, x, hist);
    pb.A.row(0) = bk.grad_x.transpose() * g;
    pb.c(0) = -cfg.kappa * b0 - bk.grad_t - bk.grad_x.dot(f);

    Eigen::Index row = 1;
    for (NodeIndex l : act) {
        if (l == k)
            continue;
        const BranchTriple tr = tree.branch_triple(k, l, sets);
        const SwitchValue sv = tree.switch_fn(tr, k, l, t, x, hist);
        pb.A.row(row) = sv.grad_x.transpose() * g;
        pb.c(row) = -sv.grad_t - sv.grad_x.dot(f);
        ++row;
    }
    return pb;
}

namespace {

CandidateResult to_candidate(NodeIndex k, const QpProblem& pb, const QpSolution& sol)
{
    CandidateResult r;
    r.k = k;
    r.status = sol.status;
    r.switching_rows = static_cast<std::size_t>(pb.A.rows() - 1);
    if (sol.status == QpStatus::Optimal) {
        r.u = sol.u;
        r.objective = sol.u.dot(pb.Q * sol.u);
    } else {
        r.certificate = sol.certificate;
    }
    return r;
}

}  // namespace

CandidateResult candidate_input(NodeIndex k, double t, const Eigen::VectorXd& x, const BfTree& tree,
                                const History& hist, const Dynamics& dyn, const ControlConfig& cfg)
{
    const IndexSets sets = tree.active_sets(t, x, hist, cfg.tol);
    const QpProblem pb = candidate_problem(k, t, x, tree, hist, sets, dyn, cfg);
    return to_candidate(k, pb, solve_qp(pb));
}

ControlResult control_input(double t, const Eigen::VectorXd& x, const BfTree& tree, const History& hist,
                            const Dynamics& dyn, const ControlConfig& cfg)
{
    if (x.size() != dyn.n)
        throw std::invalid_argument("state has " + std::to_string(x.size()) + " entries, dynamics expect " +
                                    std::to_string(dyn.n));
    ControlResult res;
    res.u = Eigen::VectorXd::Zero(dyn.m);
    if (t > tree.horizon()) {
        res.beyond_horizon = true;
        return res;
    }
    const IndexSets sets = tree.active_sets(t, x, hist, cfg.tol);
    res.b0 = sets.root_value();
    const auto& act = sets.root_active_elementary();
    if (act.empty())
        return res;

    std::vector<QpProblem> problems;
    problems.reserve(act.size());
    for (NodeIndex k : act)
        problems.push_back(candidate_problem(k, t, x, tree, hist, sets, dyn, cfg));
    const std::vector<QpSolution> sols = solve_qp_batch(problems, cfg.exec);

    double best = kInf;
    for (std::size_t j = 0; j < act.size(); ++j) {
        res.candidates.push_back(to_candidate(act[j], problems[j], sols[j]));
        best = std::min(best, res.candidates.back().objective);
    }
    if (!std::isfinite(best))
        throw ControllerError("all " + std::to_string(act.size()) + " candidate problems are infeasible at t = " +
                                  format_number(t),
                              t, x, res.candidates);
    // candidates are in increasing leaf order
    for (const auto& c : res.candidates) {
        if (c.feasible() && c.objective <= best + 1e-9) {
            res.u = c.u;
            res.chosen = c.k;
            res.objective = c.objective;
            break;
        }
    }
    return res;
}

Eigen::MatrixXd Sampler::draw_states(std::size_t count, std::uint64_t stream) const
{
    if (lo.size() != hi.size() || lo.size() == 0)
        throw std::invalid_argument("sampler box bounds must be non-empty and of equal size");
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + stream);
    Eigen::MatrixXd xs(lo.size(), static_cast<Eigen::Index>(count));
    for (Eigen::Index j = 0; j < xs.cols(); ++j)
        for (Eigen::Index i = 0; i < xs.rows(); ++i)
            xs(i, j) = std::uniform_real_distribution<double>(lo(i), hi(i))(rng);
    return xs;
}

bool AssumptionReport::pass() const
{
    if (!kappa_gate.pass)
        return false;
    return std::all_of(predicates.begin(), predicates.end(), [](const PredicateCheck& p) {
        return p.concavity_violations == 0 && p.first_order_violations == 0;
    });
}

KappaGate check_kappa_gate(const BfTree& tree, const ControlConfig& cfg)
{
    KappaGate a;
    a.lhs = cfg.kappa * cfg.b_min;
    // gamma == 0 on every non-temporal node, so the maximum is at least 0
    a.rhs = 0.0;
    const double t1 = tree.options().t_begin;
    const double t2 = tree.options().t_end;
    for (NodeIndex i = 0; i < tree.size(); ++i) {
        const BfNode& n = tree.node(i);
        if (n.gamma.is_zero())
            continue;
        const double hi = std::min(n.beta, t2);
        const double rate = n.gamma.max_decrease_rate(t1, hi);
        if (rate > a.rhs) {
            a.rhs = rate;
            a.worst_node = n.label;
            a.worst_time = -n.gamma.deriv(t1) >= -n.gamma.deriv(hi) ? t1 : hi;
        }
    }
    a.margin = a.lhs - a.rhs;
    a.pass = a.lhs > a.rhs;
    return a;
}

AssumptionReport check_assumptions(const BfTree& tree, const ControlConfig& cfg, const Dynamics& dyn,
                                   const std::optional<Sampler>& sampler)
{
    AssumptionReport rep;
    rep.kappa_gate = check_kappa_gate(tree, cfg);
    if (!rep.kappa_gate.pass)
        rep.warnings.push_back("kappa * b_min = " + format_number(rep.kappa_gate.lhs) +
                               " does not exceed the largest funnel decrease rate " +
                               format_number(rep.kappa_gate.rhs) + " (node " + rep.kappa_gate.worst_node + ")");
    if (!sampler)
        return rep;

    const Eigen::MatrixXd xs = sampler->draw_states(sampler->states, 1);
    const Eigen::MatrixXd ys = sampler->draw_states(sampler->states, 2);
    std::vector<std::string> seen;
    for (const Predicate& p : tree.predicates()) {
        // the same predicate may sit under several leaves
        if (std::find(seen.begin(), seen.end(), p.id()) != seen.end())
            continue;
        seen.push_back(p.id());
        PredicateCheck pc;
        pc.id = p.id();
        pc.samples = sampler->states;
        const auto hmax = p.max_value();
        for (Eigen::Index j = 0; j < xs.cols(); ++j) {
            const Eigen::VectorXd x = xs.col(j);
            const Eigen::VectorXd y = ys.col(j);
            const double hx = p.eval(x);
            const double hy = p.eval(y);
            const double hm = p.eval(0.5 * (x + y));
            const double scale = 1.0 + std::abs(hx) + std::abs(hy);
            const bool midpoint_ok = hm >= 0.5 * (hx + hy) - 1e-9 * scale;
            const bool tangent_ok = hy <= hx + p.grad(x).dot(y - x) + 1e-9 * scale;
            if (!midpoint_ok || !tangent_ok)
                ++pc.concavity_violations;

            // L_g h may vanish only at maxima of h
            const Eigen::VectorXd grad = p.grad(x);
            const Eigen::MatrixXd g = dyn.g(x);
            const double lgh = (grad.transpose() * g).norm();
            if (lgh <= 1e-9 * (1.0 + grad.norm() * g.norm())) {
                const bool at_max = hmax ? hx >= *hmax - 1e-9 * (1.0 + std::abs(*hmax)) : grad.norm() <= 1e-12;
                if (!at_max)
                    ++pc.first_order_violations;
            }
        }
        if (pc.concavity_violations)
            rep.warnings.push_back("predicate " + pc.id + " violates concavity at " +
                                   std::to_string(pc.concavity_violations) + " samples");
        if (pc.first_order_violations)
            rep.warnings.push_back("predicate " + pc.id + " has L_g h = 0 away from its maximum at " +
                                   std::to_string(pc.first_order_violations) + " samples");
        rep.predicates.push_back(pc);
    }

    rep.b_min_estimate = estimate_b_min(tree, *sampler, cfg.exec);
    if (rep.b_min_estimate && *rep.b_min_estimate < cfg.b_min)
        rep.warnings.push_back("sampled local maxima of b_0 reach down to " + format_number(*rep.b_min_estimate) +
                               ", below the configured b_min " + format_number(cfg.b_min));
    return rep;
}

}  // namespace stlcbf

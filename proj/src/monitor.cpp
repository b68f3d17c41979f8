#include "stlcbf/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stlcbf {

BarrierMin min_barrier(const Trajectory& traj, const BfTree& tree, int interior, double tol_rel)
{
    if (traj.empty())
        throw MonitorError("empty trajectory");
    if (interior < 0)
        throw std::invalid_argument("interior point count must be >= 0");
    History hist = tree.make_history();
    BarrierMin best{kInf, traj.t.front()};
    auto consider = [&](double v, double t) {
        if (v < best.value) {
            best.value = v;
            best.time = t;
        }
    };
    for (std::size_t k = 0; k < traj.size(); ++k) {
        tree.update_history(hist, traj.t[k], traj.x[k], tol_rel);
        consider(tree.eval_root(traj.t[k], traj.x[k], hist), traj.t[k]);
        if (k + 1 == traj.size())
            break;
        for (int s = 1; s <= interior; ++s) {
            const double w = static_cast<double>(s) / (interior + 1);
            const double t = (1.0 - w) * traj.t[k] + w * traj.t[k + 1];
            const Eigen::VectorXd x = (1.0 - w) * traj.x[k] + w * traj.x[k + 1];
            consider(tree.eval_root(t, x, hist), t);
        }
    }
    return best;
}

namespace {

class Robustness {
public:
    Robustness(const Trajectory& traj, const PredicateRegistry& reg) : traj_(traj), reg_(reg)
    {
        const double span = traj.t.back() - traj.t.front();
        eps_ = 1e-9 * (1.0 + std::abs(traj.t.front()) + span);
    }

    // Sample indices with t_k in [lo, hi].
    std::pair<std::size_t, std::size_t> window(double lo, double hi) const
    {
        if (lo < traj_.t.front() - eps_)
            throw MonitorError("window [" + format_number(lo) + ", " + format_number(hi) +
                               "] starts before the trace at " + format_number(traj_.t.front()));
        if (hi > traj_.t.back() + eps_)
            throw MonitorError("window [" + format_number(lo) + ", " + format_number(hi) +
                               "] extends past the trace end " + format_number(traj_.t.back()));
        const auto first = std::lower_bound(traj_.t.begin(), traj_.t.end(), lo - eps_) - traj_.t.begin();
        const auto last = std::upper_bound(traj_.t.begin(), traj_.t.end(), hi + eps_) - traj_.t.begin();
        if (first >= last)
            throw MonitorError("no samples in window [" + format_number(lo) + ", " + format_number(hi) + "]");
        return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
    }

    double at(const Formula& f, std::size_t k) const
    {
        switch (f.kind) {
        case NodeKind::True:
            return kInf;
        case NodeKind::Pred:
            return reg_.at(f.pred).eval(traj_.x[k]);
        case NodeKind::And: {
            double v = kInf;
            for (const auto& c : f.children)
                v = std::min(v, at(c, k));
            return v;
        }
        case NodeKind::Or: {
            double v = -kInf;
            for (const auto& c : f.children)
                v = std::max(v, at(c, k));
            return v;
        }
        case NodeKind::Eventually: {
            const auto [lo, hi] = window(traj_.t[k] + f.a, traj_.t[k] + f.b);
            double v = -kInf;
            for (std::size_t j = lo; j < hi; ++j)
                v = std::max(v, at(f.children[0], j));
            return v;
        }
        case NodeKind::Always: {
            const auto [lo, hi] = window(traj_.t[k] + f.a, traj_.t[k] + f.b);
            double v = kInf;
            for (std::size_t j = lo; j < hi; ++j)
                v = std::min(v, at(f.children[0], j));
            return v;
        }
        case NodeKind::Until: {
            const auto [lo, hi] = window(traj_.t[k] + f.a, traj_.t[k] + f.b);
            // running minimum of the left operand over [t, t']
            double left = kInf;
            double v = -kInf;
            for (std::size_t j = k; j < hi; ++j) {
                left = std::min(left, at(f.children[0], j));
                if (j >= lo)
                    v = std::max(v, std::min(left, at(f.children[1], j)));
            }
            return v;
        }
        }
        return 0.0;
    }

    std::size_t index_of(double t) const
    {
        const auto [lo, hi] = window(t, t);
        (void)hi;
        return lo;
    }

private:
    const Trajectory& traj_;
    const PredicateRegistry& reg_;
    double eps_ = 0.0;
};

void collect_predicates(const Formula& f, std::set<std::string>& out)
{
    if (f.kind == NodeKind::Pred)
        out.insert(f.pred);
    for (const auto& c : f.children)
        collect_predicates(c, out);
}

}  // namespace

RobustnessResult stl_robustness(const Trajectory& traj, const Formula& formula, const PredicateRegistry& registry,
                                double t, double tol)
{
    if (traj.empty())
        throw MonitorError("empty trajectory");
    const Robustness rob(traj, registry);
    RobustnessResult r;
    r.value = rob.at(formula, rob.index_of(t));
    if (r.value > tol)
        r.verdict = Verdict::Satisfied;
    else if (r.value < -tol)
        r.verdict = Verdict::Violated;
    else
        r.verdict = Verdict::Boundary;
    return r;
}

double sampling_tolerance(const Trajectory& traj, const Formula& formula, const PredicateRegistry& registry)
{
    std::set<std::string> ids;
    collect_predicates(formula, ids);
    double tol = 0.0;
    for (const auto& id : ids) {
        const Predicate& p = registry.at(id);
        for (std::size_t k = 0; k + 1 < traj.size(); ++k)
            tol = std::max(tol, std::abs(p.eval(traj.x[k + 1]) - p.eval(traj.x[k])));
    }
    return tol;
}

Theorem1Report check_theorem1(const Trajectory& traj, const BfTree& tree, const Formula& formula,
                              const PredicateRegistry& registry)
{
    Theorem1Report rep;
    const BarrierMin bm = min_barrier(traj, tree);
    rep.min_b0 = bm.value;
    rep.min_b0_time = bm.time;
    rep.robustness = stl_robustness(traj, formula, registry, 0.0).value;
    rep.tol_sampling = sampling_tolerance(traj, formula, registry);
    if (rep.min_b0 < 0.0)
        rep.verdict = ImplicationVerdict::Vacuous;
    else if (rep.robustness >= -rep.tol_sampling)
        rep.verdict = ImplicationVerdict::Holds;
    else
        rep.verdict = ImplicationVerdict::Counterexample;
    return rep;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::Satisfied:
        return "satisfied";
    case Verdict::Violated:
        return "violated";
    case Verdict::Boundary:
        return "boundary";
    }
    return "?";
}

std::string to_string(ImplicationVerdict v)
{
    switch (v) {
    case ImplicationVerdict::Holds:
        return "holds";
    case ImplicationVerdict::Vacuous:
        return "vacuous";
    case ImplicationVerdict::Counterexample:
        return "counterexample";
    }
    return "?";
}

}  // namespace stlcbf

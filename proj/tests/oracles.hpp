#pragma once

// Reference computations that share no code with the library beyond its
// public data types. Every check against them compares two independent
// derivations of the same number.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/predicate.hpp"
#include "stlcbf/qp.hpp"
#include "stlcbf/stl_ast.hpp"

namespace oracle {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

/// Central differences of a scalar function of x.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double h = 1e-6)
{
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd p = x, m = x;
        p(i) += h;
        m(i) -= h;
        g(i) = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

inline double fd_derivative(const std::function<double(double)>& f, double t, double h = 1e-6)
{
    return (f(t + h) - f(t - h)) / (2.0 * h);
}

// ---------------------------------------------------------------- QP

/// Constraint rows [A; I; -I] restricted to finite bounds, with right-hand side.
struct Rows {
    Eigen::MatrixXd M;
    Eigen::VectorXd r;
};

inline Rows stacked_rows(const stlcbf::QpProblem& pb)
{
    const Eigen::Index m = pb.Q.rows();
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (Eigen::Index i = 0; i < pb.A.rows(); ++i) {
        rows.push_back(pb.A.row(i));
        rhs.push_back(pb.c(i));
    }
    for (Eigen::Index i = 0; i < pb.lower.size(); ++i) {
        if (std::isfinite(pb.lower(i))) {
            Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(m);
            e(i) = 1.0;
            rows.push_back(e);
            rhs.push_back(pb.lower(i));
        }
    }
    for (Eigen::Index i = 0; i < pb.upper.size(); ++i) {
        if (std::isfinite(pb.upper(i))) {
            Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(m);
            e(i) = -1.0;
            rows.push_back(e);
            rhs.push_back(-pb.upper(i));
        }
    }
    Rows out;
    out.M.resize(static_cast<Eigen::Index>(rows.size()), m);
    out.r.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.M.row(static_cast<Eigen::Index>(i)) = rows[i];
        out.r(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    return out;
}

struct QpRef {
    bool feasible = false;
    Eigen::VectorXd u;
    double objective = std::numeric_limits<double>::infinity();
};

/// Exhaustive active-set enumeration: every subset of at most m linearly
/// independent rows is tried as the equality set of the KKT system. The
/// strictly convex problem has exactly one KKT point, so the first subset that
/// passes primal and dual feasibility is the optimum; none means infeasible.
inline QpRef qp_by_enumeration(const stlcbf::QpProblem& pb, double tol = 1e-9)
{
    const Rows R = stacked_rows(pb);
    const Eigen::Index m = pb.Q.rows();
    const Eigen::Index p = R.M.rows();
    const double scale = 1.0 + (R.M.rows() ? R.M.cwiseAbs().rowwise().sum().maxCoeff() : 0.0) +
                         (R.r.size() ? R.r.cwiseAbs().maxCoeff() : 0.0);

    std::vector<int> pick;
    QpRef best;
    std::function<bool(Eigen::Index)> rec = [&](Eigen::Index start) -> bool {
        // solve with the current subset
        const auto s = static_cast<Eigen::Index>(pick.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + s, m + s);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + s);
        K.topLeftCorner(m, m) = 2.0 * pb.Q;
        for (Eigen::Index j = 0; j < s; ++j) {
            K.block(0, m + j, m, 1) = -R.M.row(pick[static_cast<std::size_t>(j)]).transpose();
            K.block(m + j, 0, 1, m) = R.M.row(pick[static_cast<std::size_t>(j)]);
            rhs(m + j) = R.r(pick[static_cast<std::size_t>(j)]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        if (lu.rank() == m + s) {
            const Eigen::VectorXd z = lu.solve(rhs);
            const Eigen::VectorXd u = z.head(m);
            const bool dual_ok = s == 0 || z.tail(s).minCoeff() >= -tol * scale;
            const bool primal_ok = p == 0 || (R.M * u - R.r).minCoeff() >= -tol * scale;
            if (dual_ok && primal_ok) {
                best.feasible = true;
                best.u = u;
                best.objective = u.dot(pb.Q * u);
                return true;
            }
        }
        if (s == m)
            return false;
        for (Eigen::Index i = start; i < p; ++i) {
            pick.push_back(static_cast<int>(i));
            if (rec(i + 1))
                return true;
            pick.pop_back();
        }
        return false;
    };
    rec(0);
    return best;
}

/// Projected gradient (FISTA with gradient restart) on the dual
///   min_{y >= 0} 1/4 y^T M Q^-1 M^T y - r^T y,   u = 1/2 Q^-1 M^T y,
/// iterated in long double until the projected gradient vanishes.
/// Only meaningful for feasible problems.
inline QpRef qp_by_dual_projected_gradient(const stlcbf::QpProblem& pb, int max_iter = 2000000)
{
    using Real = long double;
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
    const Rows R = stacked_rows(pb);
    QpRef out;
    out.feasible = true;
    if (R.M.rows() == 0) {
        out.u = Eigen::VectorXd::Zero(pb.Q.rows());
        out.objective = 0.0;
        return out;
    }
    const Mat Q = pb.Q.cast<Real>();
    const Mat M = R.M.cast<Real>();
    const Vec r = R.r.cast<Real>();
    const Mat QinvMt = Eigen::LLT<Mat>(Q).solve(M.transpose());
    const Mat H = Real(0.25) * M * QinvMt;
    // Lipschitz constant of the gradient 2 H y: 2 * largest eigenvalue
    const Real L = Real(2) * std::max(Real(1e-300), Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff());
    const Real stop = Real(1e-15) * (Real(1) + r.cwiseAbs().maxCoeff());

    Vec y = Vec::Zero(M.rows());
    Vec z = y;
    Real tk = 1;
    for (int it = 0; it < max_iter; ++it) {
        const Vec grad = Real(2) * H * z - r;
        const Vec y_next = (z - grad / L).cwiseMax(Real(0));
        if (grad.dot(y_next - y) > 0) {
            // momentum points uphill: restart from the last iterate
            z = y;
            tk = 1;
            continue;
        }
        const Real t_next = Real(0.5) * (Real(1) + std::sqrt(Real(1) + Real(4) * tk * tk));
        z = y_next + ((tk - Real(1)) / t_next) * (y_next - y);
        y = y_next;
        tk = t_next;
        if (it % 64 == 0) {
            const Vec gy = Real(2) * H * y - r;
            if ((y - (y - gy).cwiseMax(Real(0))).cwiseAbs().maxCoeff() <= stop)
                break;
        }
    }
    const Vec u = Real(0.5) * QinvMt * y;
    out.u = u.cast<double>();
    out.objective = static_cast<double>(u.dot(Q * u));
    return out;
}

// ---------------------------------------------------------------- example1

/// Closed form of the example1 barrier
///   b0 = min{ h11 + g1(t), max{h211, h212} + g2(t) }
/// with g1 == 0 on [0, 20] and g2 linear from g2_zero to its root at beta2,
/// written without the tree machinery.
struct Example1 {
    double g2_zero = 24.0;
    double g2_slope = -2.0;
    double beta2 = 12.0;
    double horizon = 20.0;

    static double ball(const Eigen::VectorXd& x, double cx, double cy, double r)
    {
        return r * r - ((x(0) - cx) * (x(0) - cx) + (x(1) - cy) * (x(1) - cy));
    }
    double h11(const Eigen::VectorXd& x) const { return ball(x, 0.0, 0.0, 8.0); }
    double h211(const Eigen::VectorXd& x) const { return ball(x, 4.0, 2.0, 2.0); }
    double h212(const Eigen::VectorXd& x) const { return ball(x, -4.0, 2.0, 2.0); }
    double g2(double t) const { return g2_zero + g2_slope * t; }

    double b0(double t, const Eigen::VectorXd& x) const
    {
        if (t > horizon)
            return 0.0;
        const double left = h11(x);
        if (t > beta2)
            return left;
        return std::min(left, std::max(h211(x), h212(x)) + g2(t));
    }

    /// Active leaves by enumeration, labels "11", "211", "212". Each level
    /// compares a child against its parent with the band tol (1 + |parent|),
    /// so a leaf under the disjunction only counts when the disjunction itself
    /// attains b0.
    std::vector<std::string> active_leaves(double t, const Eigen::VectorXd& x, double tol) const
    {
        std::vector<std::string> out;
        if (t > horizon)
            return out;
        const double b = b0(t, x);
        const double band0 = tol * (1.0 + std::abs(b));
        if (std::abs(b - h11(x)) <= band0)
            out.push_back("11");
        if (t <= beta2) {
            const double inner = std::max(h211(x), h212(x));
            if (std::abs(b - (inner + g2(t))) <= band0) {
                const double band21 = tol * (1.0 + std::abs(inner));
                if (std::abs(inner - h211(x)) <= band21)
                    out.push_back("211");
                if (std::abs(inner - h212(x)) <= band21)
                    out.push_back("212");
            }
        }
        return out;
    }
};

// ---------------------------------------------------------------- random fragments

struct RandomBall {
    std::string id;
    double cx, cy, r;
};

/// A random formula in the fragment over 2-D ball predicates with matching
/// funnels that satisfy the eventually/always feasibility rules.
struct RandomFragment {
    std::string text;
    std::vector<RandomBall> balls;
    /// gamma_zero, gamma_inf, t_star per temporal operator in text order.
    std::vector<std::array<double, 3>> gammas;
};

inline RandomFragment random_fragment(std::uint64_t seed, int max_temporal = 4, int max_leaves = 6)
{
    std::mt19937_64 rng(seed);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

    RandomFragment rf;
    const int temporal = pick(1, max_temporal);
    int leaves_left = max_leaves;
    std::vector<std::string> ops;
    for (int i = 0; i < temporal; ++i) {
        const int remaining_ops = temporal - i - 1;
        const int n_leaves = std::max(1, std::min(leaves_left - remaining_ops, pick(1, 2)));
        leaves_left -= n_leaves;
        std::string inner;
        for (int j = 0; j < n_leaves; ++j) {
            RandomBall b{"q" + std::to_string(rf.balls.size()), uni(-3, 3), uni(-3, 3), uni(1, 3)};
            rf.balls.push_back(b);
            if (j)
                inner += pick(0, 1) ? " & " : " | ";
            inner += b.id;
        }
        const bool eventually = pick(0, 1) == 1;
        const double a = std::round(uni(0, 4) * 4) / 4;
        const double b = a + std::round(uni(1, 6) * 4) / 4;
        if (eventually) {
            // linear funnel with its root inside [a, b] and the clamp after b
            const double root = uni(a, b);
            const double g0 = uni(2, 40);
            const double slope = -g0 / root;
            const double t_star = b + uni(0.5, 3);
            rf.gammas.push_back({g0, g0 + slope * t_star, t_star});
            rf.text += "F[" + std::to_string(a) + "," + std::to_string(b) + "](" + inner + ")";
        } else {
            const double g = -uni(0, 2);
            rf.gammas.push_back({g, g, 0.0});
            rf.text += "G[" + std::to_string(a) + "," + std::to_string(b) + "](" + inner + ")";
        }
        if (i + 1 < temporal)
            rf.text += pick(0, 2) ? " & " : " | ";
    }
    return rf;
}

// ---------------------------------------------------------------- formula-level b0

/// Clamped linear funnel anchored at t = 0, evaluated without GammaFn.
struct LinearFunnel {
    double g0 = 0.0, ginf = 0.0, t_star = 0.0;
    double eval(double t) const
    {
        if (g0 == ginf)
            return g0;
        return t >= t_star ? ginf : g0 + (ginf - g0) * t / t_star;
    }
    /// First t >= 0 with eval(t) <= 0, or +inf.
    double root() const
    {
        if (g0 <= 0.0)
            return 0.0;
        if (ginf >= 0.0)
            return std::numeric_limits<double>::infinity();
        return g0 * t_star / (g0 - ginf);
    }
};

/// b0 straight from the formula: min/max over boolean nodes, child + gamma on
/// temporal nodes, and the deactivation rules (conjunctions of temporal
/// formulas drop finished operands, disjunctions switch off with their
/// earliest operand). No disqualification history. `funnels` follows the
/// temporal operators in text order.
class FormulaBarrier {
public:
    FormulaBarrier(const stlcbf::Formula& f, const stlcbf::PredicateRegistry& reg, std::vector<LinearFunnel> funnels)
        : f_(f), reg_(reg), funnels_(std::move(funnels))
    {
    }

    double operator()(double t, const Eigen::VectorXd& x) const
    {
        std::size_t next = 0;
        const Node n = eval(f_, t, x, next);
        return t <= n.beta ? n.value : 0.0;
    }

private:
    struct Node {
        double value;
        double beta;
        bool temporal;
    };

    Node eval(const stlcbf::Formula& f, double t, const Eigen::VectorXd& x, std::size_t& next) const
    {
        using stlcbf::NodeKind;
        const double inf = std::numeric_limits<double>::infinity();
        switch (f.kind) {
        case NodeKind::Pred:
            return {reg_.at(f.pred).eval(x), inf, false};
        case NodeKind::Eventually:
        case NodeKind::Always: {
            const LinearFunnel& g = funnels_.at(next++);
            const Node c = eval(f.children[0], t, x, next);
            const double beta = f.kind == NodeKind::Always ? f.b : g.root();
            return {t <= beta ? c.value + g.eval(t) : 0.0, beta, true};
        }
        case NodeKind::And:
        case NodeKind::Or: {
            std::vector<Node> cs;
            for (const auto& c : f.children)
                cs.push_back(eval(c, t, x, next));
            const bool is_and = f.kind == NodeKind::And;
            if (!cs.front().temporal) {
                double v = cs.front().value;
                for (const auto& c : cs)
                    v = is_and ? std::min(v, c.value) : std::max(v, c.value);
                return {v, inf, false};
            }
            if (is_and) {
                double v = inf, beta = -inf;
                for (const auto& c : cs) {
                    beta = std::max(beta, c.beta);
                    if (t <= c.beta)
                        v = std::min(v, c.value);
                }
                return {std::isfinite(v) ? v : 0.0, beta, true};
            }
            double v = -inf, beta = inf;
            for (const auto& c : cs) {
                beta = std::min(beta, c.beta);
                v = std::max(v, c.value);
            }
            return {t <= beta ? v : 0.0, beta, true};
        }
        default:
            throw std::invalid_argument("formula-level oracle: unsupported node");
        }
    }

    stlcbf::Formula f_;
    const stlcbf::PredicateRegistry& reg_;
    std::vector<LinearFunnel> funnels_;
};

inline std::vector<LinearFunnel> funnels_of(const RandomFragment& rf)
{
    std::vector<LinearFunnel> out;
    for (const auto& g : rf.gammas)
        out.push_back({g[0], g[1], g[2]});
    return out;
}

// ---------------------------------------------------------------- grid search

/// Minimal-cost points of {u | feasible(u)} for the cost u^T Q u, found by
/// dense search in whitened coordinates w = L^T u (Q = L L^T) where the cost
/// is |w|^2. One and two input dimensions. Along each ray the first feasible
/// radius is located by a scan followed by bisection; in 2-D every local
/// minimum over the angle grid is refined by golden-section search. Returns
/// all local minimizers whose cost lies within rel_tie of the best.
inline std::vector<Eigen::VectorXd> grid_min_cost(const std::function<bool(const Eigen::VectorXd&)>& feasible,
                                                  const Eigen::MatrixXd& Q, double radius, double rel_tie = 1e-6)
{
    const Eigen::Index m = Q.rows();
    if (m < 1 || m > 2)
        throw std::invalid_argument("grid search supports one or two inputs");
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(Q).matrixL();
    const Eigen::MatrixXd to_u = L.transpose().inverse();
    auto ok = [&](const Eigen::VectorXd& w) { return feasible(to_u * w); };
    const double inf = std::numeric_limits<double>::infinity();

    if (ok(Eigen::VectorXd::Zero(m)))
        return {Eigen::VectorXd::Zero(m)};

    const int scan = m == 1 ? 20000 : 200;
    auto first_radius = [&](const Eigen::VectorXd& dir) {
        double prev = 0.0;
        for (int k = 1; k <= scan; ++k) {
            const double r = radius * k / scan;
            if (ok(r * dir)) {
                double lo = prev, hi = r;
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (ok(mid * dir) ? hi : lo) = mid;
                }
                return hi;
            }
            prev = r;
        }
        return inf;
    };

    struct Hit {
        double r;
        Eigen::VectorXd w;
    };
    std::vector<Hit> hits;
    if (m == 1) {
        for (double sgn : {1.0, -1.0}) {
            Eigen::VectorXd d(1);
            d(0) = sgn;
            const double r = first_radius(d);
            if (std::isfinite(r))
                hits.push_back({r, r * d});
        }
    } else {
        const int na = 1440;
        const double dth = 2.0 * M_PI / na;
        auto dir = [](double th) {
            Eigen::VectorXd d(2);
            d << std::cos(th), std::sin(th);
            return d;
        };
        std::vector<double> r(na);
        for (int i = 0; i < na; ++i)
            r[static_cast<std::size_t>(i)] = first_radius(dir(i * dth));
        for (int i = 0; i < na; ++i) {
            const double ri = r[static_cast<std::size_t>(i)];
            const double rl = r[static_cast<std::size_t>((i + na - 1) % na)];
            const double rr = r[static_cast<std::size_t>((i + 1) % na)];
            if (!std::isfinite(ri) || ri > rl || ri > rr)
                continue;
            // golden section on [th - dth, th + dth]
            const double g = 0.5 * (std::sqrt(5.0) - 1.0);
            double a = (i - 1) * dth, b = (i + 1) * dth;
            double c = b - g * (b - a), d = a + g * (b - a);
            double fc = first_radius(dir(c)), fd = first_radius(dir(d));
            for (int it = 0; it < 60; ++it) {
                if (fc <= fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = first_radius(dir(c));
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = first_radius(dir(d));
                }
            }
            const double th = 0.5 * (a + b);
            const double rt = first_radius(dir(th));
            const double best_r = std::min(rt, ri);
            hits.push_back({best_r, best_r * (rt <= ri ? dir(th) : dir(i * dth))});
        }
    }
    double best = inf;
    for (const auto& h : hits)
        best = std::min(best, h.r);
    std::vector<Eigen::VectorXd> out;
    for (const auto& h : hits)
        if (h.r * h.r <= best * best * (1.0 + rel_tie) + 1e-14)
            out.push_back(to_u * h.w);
    return out;
}

}  // namespace oracle

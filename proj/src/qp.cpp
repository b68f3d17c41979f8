#include "stlcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace stlcbf {

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

// All inequality rows, including finite bounds, as C x >= d.
struct Rows {
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
    // origin of each row: index into [A rows, lower, upper]
    std::vector<Eigen::Index> origin;
};

void validate(const QpProblem& pb)
{
    const Eigen::Index m = pb.Q.rows();
    if (m == 0 || pb.Q.cols() != m)
        throw QpError("Q must be a non-empty square matrix");
    if (pb.A.rows() != pb.c.size())
        throw QpError("A has " + std::to_string(pb.A.rows()) + " rows but c has " + std::to_string(pb.c.size()) +
                      " entries");
    if (pb.A.rows() > 0 && pb.A.cols() != m)
        throw QpError("A must have as many columns as Q");
    if (pb.lower.size() != 0 && pb.lower.size() != m)
        throw QpError("lower bound dimension mismatch");
    if (pb.upper.size() != 0 && pb.upper.size() != m)
        throw QpError("upper bound dimension mismatch");
    if (!pb.Q.allFinite() || !pb.A.allFinite() || !pb.c.allFinite())
        throw QpError("QP data must be finite");
    const double qn = std::max(1.0, pb.Q.cwiseAbs().maxCoeff());
    if ((pb.Q - pb.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * qn)
        throw QpError("Q is not symmetric");
    for (Eigen::Index i = 0; i < pb.lower.size(); ++i)
        if (pb.upper.size() && pb.lower(i) > pb.upper(i))
            throw QpError("lower bound exceeds upper bound at component " + std::to_string(i));
}

Rows assemble(const QpProblem& pb)
{
    const Eigen::Index m = pb.dim();
    const Eigen::Index p = pb.A.rows();
    std::vector<Eigen::Index> origin;
    for (Eigen::Index i = 0; i < p; ++i)
        origin.push_back(i);
    for (Eigen::Index i = 0; i < pb.lower.size(); ++i)
        if (std::isfinite(pb.lower(i)))
            origin.push_back(p + i);
    for (Eigen::Index i = 0; i < pb.upper.size(); ++i)
        if (std::isfinite(pb.upper(i)))
            origin.push_back(p + m + i);

    Rows r;
    r.origin = origin;
    r.C.setZero(static_cast<Eigen::Index>(origin.size()), m);
    r.d.setZero(static_cast<Eigen::Index>(origin.size()));
    for (Eigen::Index row = 0; row < r.C.rows(); ++row) {
        const Eigen::Index o = origin[static_cast<std::size_t>(row)];
        if (o < p) {
            r.C.row(row) = pb.A.row(o);
            r.d(row) = pb.c(o);
        } else if (o < p + m) {
            r.C(row, o - p) = 1.0;
            r.d(row) = pb.lower(o - p);
        } else {
            r.C(row, o - p - m) = -1.0;
            r.d(row) = -pb.upper(o - p - m);
        }
    }
    return r;
}

// Orthogonal factors of the dual active-set method: J = L^-T * Qf with
// L^-1 N = Qf [R; 0] for the active normals N.
class ActiveFactor {
public:
    ActiveFactor(const Eigen::MatrixXd& L, Eigen::Index n) : R_(Eigen::MatrixXd::Zero(n, n)), n_(n)
    {
        J_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n, n));
    }

    Eigen::Index q() const { return q_; }
    const Eigen::MatrixXd& J() const { return J_; }

    // r = R^-1 d[0:q)
    Eigen::VectorXd solve_r(const Eigen::VectorXd& d) const
    {
        if (q_ == 0)
            return Eigen::VectorXd();
        return R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
    }

    void add(Eigen::VectorXd d)
    {
        for (Eigen::Index j = n_ - 1; j > q_; --j) {
            const double a = d(j - 1);
            const double b = d(j);
            const double h = std::hypot(a, b);
            if (h == 0.0)
                continue;
            const double c = a / h;
            const double s = b / h;
            d(j - 1) = h;
            d(j) = 0.0;
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double j1 = J_(k, j - 1);
                const double j2 = J_(k, j);
                J_(k, j - 1) = c * j1 + s * j2;
                J_(k, j) = -s * j1 + c * j2;
            }
        }
        R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        ++q_;
    }

    void drop(Eigen::Index l)
    {
        for (Eigen::Index col = l; col + 1 < q_; ++col)
            R_.col(col) = R_.col(col + 1);
        R_.col(q_ - 1).setZero();
        --q_;
        for (Eigen::Index j = l; j < q_; ++j) {
            const double a = R_(j, j);
            const double b = R_(j + 1, j);
            const double h = std::hypot(a, b);
            if (h == 0.0)
                continue;
            const double c = a / h;
            const double s = b / h;
            for (Eigen::Index k = j; k < q_; ++k) {
                const double r1 = R_(j, k);
                const double r2 = R_(j + 1, k);
                R_(j, k) = c * r1 + s * r2;
                R_(j + 1, k) = -s * r1 + c * r2;
            }
            R_(j + 1, j) = 0.0;
            for (Eigen::Index k = 0; k < n_; ++k) {
                const double j1 = J_(k, j);
                const double j2 = J_(k, j + 1);
                J_(k, j) = c * j1 + s * j2;
                J_(k, j + 1) = -s * j1 + c * j2;
            }
        }
        // rows >= q of the dropped column block are zero again
        R_.row(q_).setZero();
    }

private:
    Eigen::MatrixXd J_;
    Eigen::MatrixXd R_;
    Eigen::Index n_;
    Eigen::Index q_ = 0;
};

}  // namespace

double QpProblem::scale() const
{
    double a = 0.0;
    if (A.size())
        a = A.rowwise().lpNorm<1>().maxCoeff();
    const double cn = c.size() ? c.cwiseAbs().maxCoeff() : 0.0;
    return 1.0 + a + cn;
}

QpSolution solve_qp(const QpProblem& pb)
{
    validate(pb);
    const Eigen::Index n = pb.dim();
    const Eigen::Index p = pb.A.rows();

    Eigen::LLT<Eigen::MatrixXd> llt(2.0 * pb.Q);
    if (llt.info() != Eigen::Success)
        throw QpError("Q is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i)))
            throw QpError("Q is not positive definite");

    const Rows rows = assemble(pb);
    const Eigen::Index nr = rows.C.rows();
    const double scale = pb.scale();
    const double feas_tol = 1e-12 * scale;
    const double eps = 1e-14;

    ActiveFactor fac(L, n);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> active;
    std::vector<double> mult;
    std::vector<char> is_active(static_cast<std::size_t>(nr), 0);

    QpSolution sol;
    const int max_iter = 100 * static_cast<int>(n + nr + 1);
    int iter = 0;

    auto finish_optimal = [&]() {
        sol.status = QpStatus::Optimal;
        sol.u = x;
        sol.multipliers = Eigen::VectorXd::Zero(p);
        sol.bound_multipliers = Eigen::VectorXd::Zero(2 * n);
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index o = rows.origin[static_cast<std::size_t>(active[k])];
            if (o < p)
                sol.multipliers(o) = mult[k];
            else
                sol.bound_multipliers(o - p) = mult[k];
        }
        sol.objective = x.dot(pb.Q * x);
        sol.iterations = iter;
        sol.kkt_residual = check_kkt(pb, sol).max_residual();
        return sol;
    };

    while (true) {
        // most violated inactive row
        Eigen::Index pick = -1;
        double worst = -feas_tol;
        for (Eigen::Index r = 0; r < nr; ++r) {
            if (is_active[static_cast<std::size_t>(r)])
                continue;
            const double s = rows.C.row(r).dot(x) - rows.d(r);
            if (s < worst) {
                worst = s;
                pick = r;
            }
        }
        if (pick < 0)
            return finish_optimal();

        const Eigen::VectorXd np = rows.C.row(pick).transpose();
        double slack = worst;
        double u_new = 0.0;

        while (true) {
            if (++iter > max_iter)
                throw QpError("active-set iteration limit reached");
            const Eigen::VectorXd d = fac.J().transpose() * np;
            const Eigen::Index q = fac.q();
            const Eigen::VectorXd z = fac.J().rightCols(n - q) * d.tail(n - q);
            const Eigen::VectorXd r = fac.solve_r(d);

            double t1 = kInfD;
            Eigen::Index drop = -1;
            for (Eigen::Index k = 0; k < q; ++k) {
                if (r(k) > eps) {
                    const double ratio = mult[static_cast<std::size_t>(k)] / r(k);
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = k;
                    }
                }
            }
            const double zn = z.dot(np);
            const double t2 = (z.norm() > eps * (1.0 + np.norm()) && zn > 0.0) ? -slack / zn : kInfD;

            if (!std::isfinite(t1) && !std::isfinite(t2)) {
                // n_p = sum r_k n_k with r <= 0: Farkas certificate
                sol.status = QpStatus::Infeasible;
                sol.iterations = iter;
                sol.certificate = Eigen::VectorXd::Zero(p + 2 * n);
                sol.certificate(rows.origin[static_cast<std::size_t>(pick)]) = 1.0;
                for (Eigen::Index k = 0; k < q; ++k) {
                    const Eigen::Index o = rows.origin[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])];
                    sol.certificate(o) += std::max(0.0, -r(k));
                }
                sol.certificate /= sol.certificate.sum();
                sol.u = x;
                sol.objective = kInfD;
                return sol;
            }

            const double t = std::min(t1, t2);
            if (std::isfinite(t2))
                x += t * z;
            for (Eigen::Index k = 0; k < q; ++k)
                mult[static_cast<std::size_t>(k)] -= t * r(k);
            u_new += t;

            if (std::isfinite(t2) && t2 <= t1) {
                fac.add(d);
                active.push_back(pick);
                mult.push_back(u_new);
                is_active[static_cast<std::size_t>(pick)] = 1;
                break;
            }
            // partial step: drop the blocking row and retry the same row
            is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
            active.erase(active.begin() + drop);
            mult.erase(mult.begin() + drop);
            fac.drop(drop);
            slack = np.dot(x) - rows.d(pick);
            if (slack >= -feas_tol) {
                // the primal step already satisfied the row; it stays inactive
                break;
            }
        }
    }
}

double KktReport::max_residual() const
{
    return std::max({stationarity, primal_infeasibility, complementarity, dual_infeasibility});
}

KktReport check_kkt(const QpProblem& pb, const QpSolution& sol)
{
    if (sol.status != QpStatus::Optimal)
        throw QpError("KKT check requires an optimal solution");
    const Eigen::Index n = pb.dim();
    const Eigen::Index p = pb.A.rows();
    KktReport rep;
    rep.scale = pb.scale();

    Eigen::VectorXd grad = 2.0 * pb.Q * sol.u;
    if (p)
        grad -= pb.A.transpose() * sol.multipliers;
    Eigen::VectorXd lam_lo = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd lam_hi = Eigen::VectorXd::Zero(n);
    if (sol.bound_multipliers.size() == 2 * n) {
        lam_lo = sol.bound_multipliers.head(n);
        lam_hi = sol.bound_multipliers.tail(n);
    }
    grad -= lam_lo;
    grad += lam_hi;
    rep.stationarity = grad.cwiseAbs().maxCoeff();

    double prim = 0.0;
    double comp = 0.0;
    double dual = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double s = pb.A.row(i).dot(sol.u) - pb.c(i);
        prim = std::max(prim, -s);
        comp = std::max(comp, std::abs(sol.multipliers(i) * s));
        dual = std::max(dual, -sol.multipliers(i));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (pb.lower.size() && std::isfinite(pb.lower(i))) {
            const double s = sol.u(i) - pb.lower(i);
            prim = std::max(prim, -s);
            comp = std::max(comp, std::abs(lam_lo(i) * s));
        }
        if (pb.upper.size() && std::isfinite(pb.upper(i))) {
            const double s = pb.upper(i) - sol.u(i);
            prim = std::max(prim, -s);
            comp = std::max(comp, std::abs(lam_hi(i) * s));
        }
        dual = std::max({dual, -lam_lo(i), -lam_hi(i)});
    }
    rep.primal_infeasibility = prim;
    rep.complementarity = comp;
    rep.dual_infeasibility = dual;
    return rep;
}

CertificateReport check_certificate(const QpProblem& pb, const QpSolution& sol)
{
    if (sol.status != QpStatus::Infeasible)
        throw QpError("certificate check requires an infeasible solution");
    const Eigen::Index n = pb.dim();
    const Eigen::Index p = pb.A.rows();
    const Eigen::VectorXd& y = sol.certificate;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    double rhs = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        g += y(i) * pb.A.row(i).transpose();
        rhs += y(i) * pb.c(i);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(p + i) != 0.0) {
            g(i) += y(p + i);
            rhs += y(p + i) * pb.lower(i);
        }
        if (y(p + n + i) != 0.0) {
            g(i) -= y(p + n + i);
            rhs -= y(p + n + i) * pb.upper(i);
        }
    }
    CertificateReport rep;
    rep.stationarity = g.cwiseAbs().maxCoeff();
    rep.margin = rhs;
    rep.min_entry = y.minCoeff();
    return rep;
}

}  // namespace stlcbf

#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace stlcbf {

/// min u^T Q u  s.t.  A u >= c,  lower <= u <= upper.
///
/// Bounds are optional: leave `lower`/`upper` empty, or use +-infinity per
/// component.
struct QpProblem {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd A;
    Eigen::VectorXd c;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::Index dim() const { return Q.rows(); }
    /// 1 + ||A||_inf + ||c||_inf; every tolerance is relative to this.
    double scale() const;
};

enum class QpStatus { Optimal, Infeasible };

struct QpSolution {
    QpStatus status = QpStatus::Optimal;
    Eigen::VectorXd u;
    /// Multipliers of the rows of A (>= 0).
    Eigen::VectorXd multipliers;
    /// Multipliers of the bounds: first the m lower bounds, then the m upper bounds.
    Eigen::VectorXd bound_multipliers;
    /// For Infeasible: y >= 0 over [A rows, lower, upper] with
    /// [A; I; -I]^T y = 0 and y^T [c; lower; -upper] > 0.
    Eigen::VectorXd certificate;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

class QpError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dual active-set solve on the Cholesky factor of Q. Exact for the small
/// dense problems the controller produces; deterministic.
QpSolution solve_qp(const QpProblem& problem);

struct KktReport {
    double stationarity = 0.0;
    double primal_infeasibility = 0.0;
    double complementarity = 0.0;
    double dual_infeasibility = 0.0;
    double scale = 1.0;

    double max_residual() const;
    bool ok(double rel_tol = 1e-8) const { return max_residual() <= rel_tol * scale; }
};

/// Throws QpError when `solution` is not Optimal.
KktReport check_kkt(const QpProblem& problem, const QpSolution& solution);

/// Residuals of a Farkas certificate: ||M^T y|| and the (positive) margin y^T rhs.
struct CertificateReport {
    double stationarity = 0.0;
    double margin = 0.0;
    double min_entry = 0.0;
    bool valid(double scale) const { return min_entry >= 0.0 && margin > 1e-12 * scale && stationarity <= 1e-8 * scale; }
};
CertificateReport check_certificate(const QpProblem& problem, const QpSolution& solution);

}  // namespace stlcbf

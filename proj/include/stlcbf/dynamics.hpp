#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace stlcbf {

/// Input-affine system x' = f(x) + g(x) u.
struct Dynamics {
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> g;

    Eigen::VectorXd rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// x' = u with n = m.
Dynamics single_integrator(Eigen::Index n);

/// x' = A x + B u.
Dynamics linear_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Team of omnidirectional robots with three wheels each. Agent i has state
/// [p_x, p_y, rho] and three wheel speeds as input.
struct OmniRobotTeam {
    std::vector<double> gains;
    double body_radius = 0.2;
    double wheel_radius = 0.02;
    /// Softening term of the repulsive drift denominator.
    double softening = 1e-5;

    std::size_t agents() const { return gains.size(); }
    /// Wheel geometry matrix B_i.
    Eigen::Matrix3d wheel_matrix() const;
    Eigen::VectorXd drift(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd input_map(const Eigen::VectorXd& x) const;
    Dynamics as_dynamics() const;
};

Eigen::VectorXd robot_dynamics(const OmniRobotTeam& team, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace stlcbf

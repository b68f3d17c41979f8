#include "stlcbf/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stlcbf {

Eigen::VectorXd Dynamics::rhs(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const
{
    if (x.size() != n || u.size() != m)
        throw std::invalid_argument("dynamics called with state/input of size " + std::to_string(x.size()) + "/" +
                                    std::to_string(u.size()) + ", expected " + std::to_string(n) + "/" +
                                    std::to_string(m));
    return f(x) + g(x) * u;
}

Dynamics single_integrator(Eigen::Index n)
{
    if (n <= 0)
        throw std::invalid_argument("state dimension must be positive");
    Dynamics d;
    d.n = n;
    d.m = n;
    d.f = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n); };
    d.g = [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(n, n); };
    return d;
}

Dynamics linear_system(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    if (A.rows() == 0 || A.rows() != A.cols() || B.rows() != A.rows() || B.cols() == 0)
        throw std::invalid_argument("linear system needs square A and B with matching rows");
    Dynamics d;
    d.n = A.rows();
    d.m = B.cols();
    d.f = [A](const Eigen::VectorXd& x) -> Eigen::VectorXd { return A * x; };
    d.g = [B](const Eigen::VectorXd&) -> Eigen::MatrixXd { return B; };
    return d;
}

Eigen::Matrix3d OmniRobotTeam::wheel_matrix() const
{
    const double c = std::cos(std::numbers::pi / 6.0);
    const double s = std::sin(std::numbers::pi / 6.0);
    const double L = body_radius;
    Eigen::Matrix3d B;
    B << 0.0, c, -c,
        -1.0, s, s,
        L, L, L;
    return B;
}

Eigen::VectorXd OmniRobotTeam::drift(const Eigen::VectorXd& x) const
{
    const auto na = static_cast<Eigen::Index>(agents());
    if (x.size() != 3 * na)
        throw std::invalid_argument("team state must have 3 entries per agent");
    Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * na);
    for (Eigen::Index i = 0; i < na; ++i) {
        const Eigen::Vector2d pi = x.segment<2>(3 * i);
        for (Eigen::Index j = 0; j < na; ++j) {
            if (j == i)
                continue;
            const Eigen::Vector2d diff = pi - x.segment<2>(3 * j);
            f.segment<2>(3 * i) += gains[static_cast<std::size_t>(i)] * diff / (diff.squaredNorm() + softening);
        }
    }
    return f;
}

Eigen::MatrixXd OmniRobotTeam::input_map(const Eigen::VectorXd& x) const
{
    const auto na = static_cast<Eigen::Index>(agents());
    if (x.size() != 3 * na)
        throw std::invalid_argument("team state must have 3 entries per agent");
    const Eigen::Matrix3d wheel = wheel_matrix().transpose().inverse() * wheel_radius;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3 * na, 3 * na);
    for (Eigen::Index i = 0; i < na; ++i) {
        const double rho = x(3 * i + 2);
        Eigen::Matrix3d rot;
        rot << std::cos(rho), -std::sin(rho), 0.0,
            std::sin(rho), std::cos(rho), 0.0,
            0.0, 0.0, 1.0;
        g.block<3, 3>(3 * i, 3 * i) = rot * wheel;
    }
    return g;
}

Dynamics OmniRobotTeam::as_dynamics() const
{
    if (gains.empty())
        throw std::invalid_argument("robot team needs at least one agent");
    for (double k : gains)
        if (!(k >= 0.0) || !std::isfinite(k))
            throw std::invalid_argument("robot gains must be finite and nonnegative");
    Dynamics d;
    d.n = static_cast<Eigen::Index>(3 * agents());
    d.m = d.n;
    const OmniRobotTeam team = *this;
    d.f = [team](const Eigen::VectorXd& x) { return team.drift(x); };
    d.g = [team](const Eigen::VectorXd& x) { return team.input_map(x); };
    return d;
}

Eigen::VectorXd robot_dynamics(const OmniRobotTeam& team, const Eigen::VectorXd& x, const Eigen::VectorXd& u)
{
    if (u.size() != x.size())
        throw std::invalid_argument("team input must have 3 wheel speeds per agent");
    return team.drift(x) + team.input_map(x) * u;
}

}  // namespace stlcbf

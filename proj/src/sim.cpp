#include "stlcbf/sim.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "parallel.hpp"

namespace stlcbf {

double Trajectory::mean_controller_seconds() const
{
    if (controller_seconds.empty())
        return 0.0;
    return std::accumulate(controller_seconds.begin(), controller_seconds.end(), 0.0) /
           static_cast<double>(controller_seconds.size());
}

Eigen::VectorXd integrate_interval(const Dynamics& dyn, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                   double dt, Integrator integrator, int substeps)
{
    if (substeps <= 0)
        throw std::invalid_argument("substep count must be positive");
    const double h = dt / substeps;
    Eigen::VectorXd y = x;
    for (int s = 0; s < substeps; ++s) {
        if (integrator == Integrator::Euler) {
            y += h * dyn.rhs(y, u);
        } else {
            const Eigen::VectorXd k1 = dyn.rhs(y, u);
            const Eigen::VectorXd k2 = dyn.rhs(y + 0.5 * h * k1, u);
            const Eigen::VectorXd k3 = dyn.rhs(y + 0.5 * h * k2, u);
            const Eigen::VectorXd k4 = dyn.rhs(y + h * k3, u);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return y;
}

Trajectory simulate(const Dynamics& dyn, const BfTree& tree, const ControlConfig& cfg, double t0,
                    const Eigen::VectorXd& x0, double t_end, const SimOptions& opts)
{
    if (!(opts.rate > 0.0) || !std::isfinite(opts.rate))
        throw std::invalid_argument("control rate must be positive");
    if (!(t_end >= t0))
        throw std::invalid_argument("simulation end precedes its start");
    if (x0.size() != dyn.n)
        throw std::invalid_argument("initial state has " + std::to_string(x0.size()) + " entries, expected " +
                                    std::to_string(dyn.n));
    cfg.validate(dyn.m);

    const double dt = 1.0 / opts.rate;
    const auto ticks = static_cast<long long>(std::llround((t_end - t0) * opts.rate));
    History hist = tree.make_history();
    if (const double b = tree.eval_root(t0, x0, hist); b < 0.0)
        throw SimError("initial state lies outside the safe set (b0 = " + format_number(b) + ")", t0, x0);
    Trajectory tr;
    Eigen::VectorXd x = x0;
    for (long long k = 0; k <= ticks; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        if (!x.allFinite())
            throw SimError("state became non-finite at t = " + format_number(t), t, x);
        tree.update_history(hist, t, x, cfg.tol);

        const auto start = std::chrono::steady_clock::now();
        const ControlResult cr = control_input(t, x, tree, hist, dyn, cfg);
        const std::chrono::duration<double> spent = std::chrono::steady_clock::now() - start;

        int feasible = 0;
        for (const auto& c : cr.candidates)
            feasible += c.feasible() ? 1 : 0;
        tr.t.push_back(t);
        tr.x.push_back(x);
        tr.u.push_back(cr.u);
        tr.b0.push_back(cr.beyond_horizon ? tree.eval_root(t, x, hist) : cr.b0);
        tr.chosen.push_back(cr.chosen);
        tr.candidate_status.emplace_back(feasible, static_cast<int>(cr.candidates.size()));
        tr.controller_seconds.push_back(spent.count());

        if (k < ticks)
            x = integrate_interval(dyn, x, cr.u, dt, opts.integrator, opts.substeps);
    }
    return tr;
}

std::vector<RunOutcome> simulate_batch(const Dynamics& dyn, const BfTree& tree, const ControlConfig& cfg, double t0,
                                       const std::vector<Eigen::VectorXd>& x0s, double t_end,
                                       const SimOptions& opts, Exec exec)
{
    // the inner controller stays serial; parallelism is across runs
    ControlConfig inner = cfg;
    inner.exec = Exec::Serial;
    std::vector<RunOutcome> out(x0s.size());
    detail::for_each_index(x0s.size(), exec, [&](std::size_t j) {
        try {
            out[j].trajectory = simulate(dyn, tree, inner, t0, x0s[j], t_end, opts);
            out[j].ok = true;
        } catch (const std::exception& e) {
            out[j].error = e.what();
        }
    });
    return out;
}

}  // namespace stlcbf

// Serial vs OpenMP timing of the batch kernels. Results are compared for
// equality before any timing is printed.
#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "stlcbf/controller.hpp"
#include "stlcbf/kernels.hpp"
#include "stlcbf/scenario.hpp"
#include "stlcbf/sim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace stlcbf;

namespace {

template <class F>
double seconds(F&& f)
{
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool same)
{
    std::printf("%-22s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
                serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string path = argc > 1 ? argv[1] : std::string(STLCBF_SCENARIO_DIR) + "/example1_toy.json";
    const Scenario sc = load_scenario(path);
    const CompiledScenario cs = compile_scenario(sc);
    const BfTree& tree = cs.tree;
    const Eigen::Index n = cs.dynamics.n;
#ifdef _OPENMP
    std::printf("scenario %s, %d OpenMP threads\n", sc.name.c_str(), omp_get_max_threads());
#else
    std::printf("scenario %s, built without OpenMP\n", sc.name.c_str());
#endif
    int failures = 0;

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ux(-10.0, 10.0);
    std::uniform_real_distribution<double> ut(sc.run.t0, std::min(sc.run.t_end, tree.horizon()));

    {
        const std::size_t N = 200000;
        Eigen::MatrixXd xs(n, static_cast<Eigen::Index>(N));
        std::vector<double> ts(N);
        for (std::size_t j = 0; j < N; ++j) {
            ts[j] = ut(rng);
            for (Eigen::Index i = 0; i < n; ++i)
                xs(i, static_cast<Eigen::Index>(j)) = ux(rng);
        }
        const History hist = tree.make_history();
        std::vector<double> a, b;
        const double s = seconds([&] { a = batch_eval_root(tree, hist, ts, xs, Exec::Serial); });
        const double p = seconds([&] { b = batch_eval_root(tree, hist, ts, xs, Exec::Parallel); });
        report("batch b0", s, p, a == b);
        failures += a != b;
    }
    {
        std::vector<QpProblem> pbs;
        for (int j = 0; j < 20000; ++j) {
            QpProblem pb;
            const int m = 4, rows = 6;
            Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(m, m, [&]() { return ux(rng); });
            pb.Q = M * M.transpose() + Eigen::MatrixXd::Identity(m, m);
            pb.A = Eigen::MatrixXd::NullaryExpr(rows, m, [&]() { return ux(rng); });
            pb.c = Eigen::VectorXd::NullaryExpr(rows, [&]() { return ux(rng); });
            pbs.push_back(pb);
        }
        std::vector<QpSolution> a, b;
        const double s = seconds([&] { a = solve_qp_batch(pbs, Exec::Serial); });
        const double p = seconds([&] { b = solve_qp_batch(pbs, Exec::Parallel); });
        bool same = a.size() == b.size();
        for (std::size_t j = 0; same && j < a.size(); ++j)
            same = a[j].status == b[j].status && a[j].u == b[j].u;
        report("QP batch", s, p, same);
        failures += !same;
    }
    {
        std::vector<Eigen::VectorXd> x0s;
        for (int j = 0; j < 8; ++j)
            x0s.push_back(initial_state(sc, cs, static_cast<std::uint64_t>(j + 1)));
        std::vector<RunOutcome> a, b;
        const double s = seconds([&] {
            a = simulate_batch(cs.dynamics, tree, cs.control, sc.run.t0, x0s, sc.run.t_end, cs.sim, Exec::Serial);
        });
        const double p = seconds([&] {
            b = simulate_batch(cs.dynamics, tree, cs.control, sc.run.t0, x0s, sc.run.t_end, cs.sim, Exec::Parallel);
        });
        bool same = true;
        for (std::size_t j = 0; j < a.size(); ++j)
            same = same && a[j].ok == b[j].ok && a[j].trajectory.x == b[j].trajectory.x;
        report("closed-loop batch", s, p, same);
        failures += !same;
    }
    return failures == 0 ? 0 : 1;
}

#pragma once

// Library objects shared by the unit and acceptance tests.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "stlcbf/bf_tree.hpp"
#include "stlcbf/controller.hpp"
#include "stlcbf/predicate.hpp"
#include "stlcbf/scenario.hpp"
#include "stlcbf/stl_ast.hpp"

namespace fx {

inline Eigen::MatrixXd eye(Eigen::Index n) { return Eigen::MatrixXd::Identity(n, n); }

inline Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v)
        out(i++) = d;
    return out;
}

inline stlcbf::Predicate ball(const std::string& id, Eigen::Index n, std::vector<Eigen::Index> idx, Eigen::VectorXd c,
                              double r)
{
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), n);
    for (std::size_t j = 0; j < idx.size(); ++j)
        S(static_cast<Eigen::Index>(j), idx[j]) = 1.0;
    return stlcbf::Predicate(id, stlcbf::Ball2{S, std::move(c), r});
}

inline stlcbf::PredicateRegistry example1_registry()
{
    stlcbf::PredicateRegistry reg;
    reg.add(ball("p11", 2, {0, 1}, vec({0, 0}), 8));
    reg.add(ball("p211", 2, {0, 1}, vec({4, 2}), 2));
    reg.add(ball("p212", 2, {0, 1}, vec({-4, 2}), 2));
    return reg;
}

inline const char* kExample1 = "G[0,20](p11) & F[5,15](p211 | p212)";

/// gamma_1 == 0 on G, gamma_2 linear 24 -> root at 12 (clamped to -16 at 20).
inline std::vector<stlcbf::GammaParams> example1_gammas()
{
    return {stlcbf::GammaParams{}, stlcbf::GammaParams{24.0, -16.0, 20.0, 0.0, false}};
}

inline stlcbf::BfTree tree_from(const std::string& text, const stlcbf::PredicateRegistry& reg,
                                const std::vector<stlcbf::GammaParams>& gammas, stlcbf::TreeOptions opts = {})
{
    const auto f = stlcbf::desugar_until(stlcbf::parse_formula(text, reg));
    return stlcbf::BfTree::build(f, reg, gammas, opts);
}

inline stlcbf::BfTree example1_tree() { return tree_from(kExample1, example1_registry(), example1_gammas()); }

inline stlcbf::PredicateRegistry registry_of(const oracle::RandomFragment& rf)
{
    stlcbf::PredicateRegistry reg;
    for (const auto& b : rf.balls)
        reg.add(ball(b.id, 2, {0, 1}, vec({b.cx, b.cy}), b.r));
    return reg;
}

inline std::vector<stlcbf::GammaParams> gammas_of(const oracle::RandomFragment& rf)
{
    std::vector<stlcbf::GammaParams> out;
    for (const auto& g : rf.gammas)
        out.push_back(stlcbf::GammaParams{g[0], g[1], g[2], 0.0, false});
    return out;
}

inline std::string scenario_path(const std::string& name)
{
    return std::string(STLCBF_SCENARIO_DIR) + "/" + name + ".json";
}

inline stlcbf::CompiledScenario compiled(const std::string& name)
{
    return stlcbf::compile_scenario(stlcbf::load_scenario(scenario_path(name)));
}

}  // namespace fx

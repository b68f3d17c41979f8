#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "stlcbf/bf_tree.hpp"

using namespace stlcbf;

namespace {

std::vector<std::string> labels(const BfTree& tree, const std::vector<NodeIndex>& ids)
{
    std::vector<std::string> out;
    for (NodeIndex i : ids)
        out.push_back(tree.node(i).label);
    std::sort(out.begin(), out.end());
    return out;
}

// x = (sqrt 62, 0) gives h11 = 2; the t below puts max(h211, h212) + gamma2 at 1.
constexpr double kT21 = 0.5 * (8.0 * 7.874007874011811 - 55.0);

}  // namespace

TEST_CASE("example1 tree structure")
{
    const BfTree tree = fx::example1_tree();
    std::set<std::string> got;
    for (NodeIndex i = 0; i < tree.size(); ++i)
        got.insert(tree.node(i).label);
    CHECK(got == std::set<std::string>{"0", "1", "2", "11", "21", "211", "212"});
    CHECK(labels(tree, tree.elementary()) == std::vector<std::string>{"11", "211", "212"});
    CHECK(tree.node(tree.at("0")).kind == BfKind::PhiMin);
    CHECK(tree.node(tree.at("1")).kind == BfKind::TemporalG);
    CHECK(tree.node(tree.at("2")).kind == BfKind::TemporalF);
    CHECK(tree.node(tree.at("21")).kind == BfKind::PsiMax);
    CHECK(tree.node(tree.at("1")).beta == 20);
    CHECK(tree.node(tree.at("2")).beta == doctest::Approx(12));
    CHECK(tree.node(tree.at("211")).beta == kInf);
    CHECK(tree.horizon() == 20);
    CHECK(tree.deactivation_times() == std::vector<double>{12, 20});
    for (NodeIndex i = 1; i < tree.size(); ++i)
        CHECK(*tree.node(i).parent < i);
}

TEST_CASE("example1 evaluation against the closed form")
{
    const BfTree tree = fx::example1_tree();
    const oracle::Example1 ex;
    const History hist = tree.make_history();
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ut(0, 25), ux(-10, 10);
    for (int s = 0; s < 2000; ++s) {
        const double t = ut(rng);
        const Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
        CHECK(tree.eval_root(t, x, hist) == doctest::Approx(ex.b0(t, x)).epsilon(1e-12));
    }

    const Eigen::VectorXd x = fx::vec({std::sqrt(62.0), 0});
    CHECK(ex.h11(x) == doctest::Approx(2));
    CHECK(tree.eval(tree.at("2"), kT21, x, hist) == doctest::Approx(1));
    CHECK(tree.eval_root(kT21, x, hist) == doctest::Approx(1));
}

TEST_CASE("single predicate tree")
{
    PredicateRegistry reg;
    reg.add(fx::ball("p", 1, {0}, fx::vec({0}), 1));
    const BfTree tree = BfTree::build(Formula::atom("p"), reg, {});
    REQUIRE(tree.size() == 1);
    CHECK(tree.node(0).kind == BfKind::Elementary);
    CHECK(tree.node(0).beta == kInf);
    const History hist = tree.make_history();
    CHECK(tree.eval_root(3, fx::vec({0}), hist) == 1);
    const auto sets = tree.active_sets(0, fx::vec({0.3}), hist, 0);
    CHECK(sets.root_active_elementary() == std::vector<NodeIndex>{0});
    const auto bk = tree.eval_bk(0, 1, fx::vec({0.3}), hist);
    CHECK(bk.value == doctest::Approx(0.91));
    CHECK(bk.grad_t == 0);
}

TEST_CASE("min over an empty qualified set is 0")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const Eigen::VectorXd far = fx::vec({50, 50});
    CHECK(tree.eval_root(20.5, far, hist) == 0);
    CHECK(tree.qualified_children(0, 20.5, hist).empty());
    CHECK(tree.eval_root(1e6, far, hist) == 0);
}

TEST_CASE("deactivation of F with gamma = 5 - 0.3 t")
{
    PredicateRegistry reg;
    reg.add(fx::ball("p", 1, {0}, fx::vec({0}), 1));
    const auto f = parse_formula("F[10,20](p)", reg);
    const BfTree tree = BfTree::build(f, reg, {GammaParams{5, 5 - 0.3 * 40, 40, 0, true}});
    CHECK(tree.node(0).beta == doctest::Approx(50.0 / 3.0).epsilon(1e-12));
    CHECK(tree.horizon() == doctest::Approx(50.0 / 3.0));
}

TEST_CASE("infeasible funnels are rejected")
{
    PredicateRegistry reg;
    reg.add(fx::ball("p", 1, {0}, fx::vec({0}), 1));
    // positive on all of [10, 20]
    CHECK_THROWS_AS(BfTree::build(parse_formula("F[10,20](p)", reg), reg, {GammaParams{50, 0, 100, 0, true}}),
                    TreeError);
    // zero before the window opens
    CHECK_THROWS_AS(BfTree::build(parse_formula("F[10,20](p)", reg), reg, {GammaParams{5, -5, 10, 0, true}}),
                    TreeError);
    // positive inside an always window
    CHECK_THROWS_AS(BfTree::build(parse_formula("G[0,5](p)", reg), reg, {GammaParams{1, -1, 10, 0, true}}),
                    TreeError);
    CHECK_THROWS_AS(BfTree::build(parse_formula("G[0,5](p)", reg), reg, {}), TreeError);
    CHECK_THROWS_AS(BfTree::build(Formula::truth(), reg, {}), TreeError);
}

TEST_CASE("qualified children of a conjunction")
{
    PredicateRegistry reg;
    reg.add(fx::ball("p", 1, {0}, fx::vec({0}), 1));
    reg.add(fx::ball("q", 1, {0}, fx::vec({0}), 2));
    const BfTree tree = fx::tree_from("G[0,3](p) & G[0,7](q)", reg, {GammaParams{}, GammaParams{}});
    const History hist = tree.make_history();
    CHECK(labels(tree, tree.qualified_children(0, 5, hist)) == std::vector<std::string>{"2"});
    CHECK(tree.qualified_children(0, 2, hist).size() == 2);
    CHECK(tree.qualified_children(0, 8, hist).empty());
}

TEST_CASE("path sets")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    CHECK(labels(tree, tree.path_set(0, tree.at("211"), 3, hist)) ==
          std::vector<std::string>{"0", "2", "21", "211"});
    CHECK(tree.path_set(0, tree.at("211"), 3, hist).front() == 0);
    CHECK(tree.path_set(tree.at("211"), tree.at("211"), 3, hist) == std::vector<NodeIndex>{tree.at("211")});
    // past beta_1 = 20 the G branch drops out of the root's qualified set
    CHECK(tree.path_set(0, tree.at("11"), 21, hist).empty());
    CHECK(tree.path_set(tree.at("1"), tree.at("11"), 21, hist).size() == 2);
    // past beta_2 = 12 the F branch drops out
    CHECK(tree.path_set(0, tree.at("212"), 12.5, hist).empty());
    CHECK_THROWS_AS(tree.eval_bk(tree.at("212"), 12.5, fx::vec({0, 0}), hist), TreeError);
}

TEST_CASE("branch value along Q_0^211")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const Eigen::VectorXd x = fx::vec({4, 2});  // h211 = 4
    // gamma_2(11.5) = 1
    const auto bk = tree.eval_bk(tree.at("211"), 11.5, x, hist);
    CHECK(bk.value == doctest::Approx(5));
    CHECK(bk.grad_t == doctest::Approx(-2));
    CHECK(bk.grad_x.norm() == doctest::Approx(0));
    // gamma_2(12.5) = -1 only after the F node deactivated; below the root the
    // branch still sums to h211 + gamma_2
    const auto b2 = tree.eval_branch(tree.at("2"), tree.at("211"), 12.5, x, hist);
    CHECK(b2.value == doctest::Approx(3));
    CHECK(b2.grad_t == doctest::Approx(-2));
}

TEST_CASE("active elementary set of the symmetric state")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const Eigen::VectorXd x = fx::vec({0, 2});
    const auto sets = tree.active_sets(0, x, hist, 1e-9);
    CHECK(labels(tree, sets.active[0]) == std::vector<std::string>{"2"});
    CHECK(labels(tree, sets.active[tree.at("2")]) == std::vector<std::string>{"21"});
    CHECK(labels(tree, sets.active[tree.at("21")]) == std::vector<std::string>{"211", "212"});
    CHECK(labels(tree, sets.root_active_elementary()) == std::vector<std::string>{"211", "212"});
    CHECK(sets.root_value() == doctest::Approx(12));

    const auto tr = tree.branch_triple(tree.at("211"), tree.at("212"), sets);
    CHECK(tree.node(tr.i).label == "211");
    CHECK(tree.node(tr.j).label == "212");
    CHECK(tree.node(tr.q).label == "21");
    CHECK_THROWS_AS(tree.branch_triple(tree.at("211"), tree.at("11"), sets), TreeError);
    CHECK_THROWS_AS(tree.branch_triple(tree.at("211"), tree.at("211"), sets), TreeError);
}

TEST_CASE("active sets match leaf enumeration")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const oracle::Example1 ex;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ut(0, 22), ux(-9, 9);
    for (double tol : {1e-7, 0.05, 0.5}) {
        for (int s = 0; s < 3000; ++s) {
            double t = ut(rng);
            Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
            if (s % 3 == 0)
                x(0) = 0;  // tie between the two disjuncts
            const auto sets = tree.active_sets(t, x, hist, tol);
            CHECK(labels(tree, sets.root_active_elementary()) == ex.active_leaves(t, x, tol));
        }
    }
}

TEST_CASE("switching function between the disjuncts")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const NodeIndex k = tree.at("211"), l = tree.at("212");
    const oracle::Example1 ex;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> ut(0, 12), ux(-9, 9);
    for (int s = 0; s < 200; ++s) {
        const double t = ut(rng);
        const Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
        const auto skl = tree.switch_fn(tree.lca_triple(k, l), k, l, t, x, hist);
        const auto slk = tree.switch_fn(tree.lca_triple(l, k), l, k, t, x, hist);
        CHECK(skl.value == doctest::Approx(ex.h211(x) - ex.h212(x)));
        CHECK(slk.value == doctest::Approx(-skl.value));
        CHECK(skl.grad_t == 0);
    }
    const Eigen::VectorXd on = fx::vec({0, -3.7});
    CHECK(tree.switch_fn(tree.lca_triple(k, l), k, l, 4, on, hist).value == doctest::Approx(0).epsilon(1e-12));

    // LCA at the min root: s = b^l - b^k
    const NodeIndex g = tree.at("11");
    const auto tr = tree.lca_triple(g, k);
    CHECK(tr.q == 0);
    const Eigen::VectorXd x = fx::vec({1, 1});
    const double want = (ex.h211(x) + ex.g2(3)) - ex.h11(x);
    CHECK(tree.switch_fn(tr, g, k, 3, x, hist).value == doctest::Approx(want));
    CHECK(tree.switch_fn(tr, g, k, 3, x, hist).grad_t == doctest::Approx(-2));
}

TEST_CASE("branch and switching gradients match finite differences")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    const NodeIndex leaves[] = {tree.at("11"), tree.at("211"), tree.at("212")};
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ut(0.5, 11.5), ux(-9, 9);
    for (int s = 0; s < 20; ++s) {
        const double t = ut(rng);
        const Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
        for (NodeIndex k : leaves) {
            const auto bk = tree.eval_bk(k, t, x, hist);
            auto fx_ = [&](const Eigen::VectorXd& y) { return tree.eval_bk(k, t, y, hist).value; };
            const Eigen::VectorXd fd = oracle::fd_gradient(fx_, x);
            for (int i = 0; i < 2; ++i)
                CHECK(oracle::rel_err(bk.grad_x(i), fd(i)) <= 1e-5);
            const double ft = oracle::fd_derivative([&](double s_) { return tree.eval_bk(k, s_, x, hist).value; }, t);
            CHECK(oracle::rel_err(bk.grad_t, ft) <= 1e-5);
        }
    }
}

TEST_CASE("history disqualification is permanent")
{
    PredicateRegistry reg;
    reg.add(fx::ball("p", 1, {0}, fx::vec({2}), 1));
    reg.add(fx::ball("q", 1, {0}, fx::vec({-2}), 1));
    const BfTree tree = fx::tree_from("F[0,6](p) | F[0,4](q)", reg,
                                      {GammaParams{5, -1, 6, 0, true}, GammaParams{5, -3, 4, 0, true}});
    REQUIRE(tree.node(0).kind == BfKind::PhiMax);
    History hist = tree.make_history();
    auto b = tree.betas(hist);
    CHECK(b[0] == doctest::Approx(tree.node(0).beta));
    CHECK(b[0] == doctest::Approx(std::min(tree.node(tree.at("1")).beta, tree.node(tree.at("2")).beta)));

    // both children stay nonnegative: no-op
    CHECK(tree.update_history(hist, 0, fx::vec({0}), 1e-9) == 0);
    CHECK(hist.disqualified_count() == 0);
    CHECK(tree.qualified_children(0, 0, hist).size() == 2);

    // at x = 2.5 and t = 1: q gives -19.25 + 3 < 0, p gives 0.75 + 3.8 > 0
    CHECK(tree.update_history(hist, 1, fx::vec({2.5}), 1e-9) == 1);
    CHECK(hist.disqualified(tree.at("2")));
    CHECK(labels(tree, tree.qualified_children(0, 1, hist)) == std::vector<std::string>{"1"});
    // moving back does not requalify
    CHECK(tree.update_history(hist, 1.5, fx::vec({0.5}), 1e-9) == 0);
    CHECK(hist.disqualified(tree.at("2")));
    b = tree.betas(hist);
    CHECK(b[0] == doctest::Approx(tree.node(tree.at("1")).beta));

    CHECK_THROWS_AS(tree.update_history(hist, 0.5, fx::vec({0}), 1e-9), std::invalid_argument);
}

TEST_CASE("horizon: b0 vanishes after the last deactivation")
{
    std::mt19937_64 rng(37);
    for (int s = 0; s < 5; ++s) {
        const auto rf = oracle::random_fragment(1000 + s);
        const auto reg = fx::registry_of(rf);
        const BfTree tree = fx::tree_from(rf.text, reg, fx::gammas_of(rf));
        const History hist = tree.make_history();
        REQUIRE(std::isfinite(tree.horizon()));
        std::uniform_real_distribution<double> ux(-6, 6), ut(0, 10);
        for (int j = 0; j < 100; ++j) {
            const double t = tree.horizon() + 1e-9 + ut(rng);
            CHECK(tree.eval_root(t, fx::vec({ux(rng), ux(rng)}), hist) == 0.0);
        }
    }
}

TEST_CASE("root value equals every active branch on random trees")
{
    std::mt19937_64 rng(41);
    for (int s = 0; s < 5; ++s) {
        const auto rf = oracle::random_fragment(2000 + s);
        CAPTURE(rf.text);
        const auto reg = fx::registry_of(rf);
        const BfTree tree = fx::tree_from(rf.text, reg, fx::gammas_of(rf));
        const History hist = tree.make_history();
        std::uniform_real_distribution<double> ux(-6, 6), ut(0, tree.horizon());
        for (int j = 0; j < 300; ++j) {
            const double t = ut(rng);
            const Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
            const auto sets = tree.active_sets(t, x, hist, 1e-12);
            if (t > sets.beta[0]) {
                // a disjunction at the root may switch off before the horizon
                CHECK(sets.root_value() == 0.0);
                continue;
            }
            REQUIRE_FALSE(sets.root_active_elementary().empty());
            for (NodeIndex k : sets.root_active_elementary())
                CHECK(std::abs(tree.eval_bk(k, t, x, hist).value - sets.root_value()) <= 1e-9);
            // triple membership conditions
            const auto& act = sets.root_active_elementary();
            for (std::size_t a = 0; a + 1 < act.size(); ++a) {
                const auto tr = tree.branch_triple(act[a], act[a + 1], sets);
                auto has = [](const std::vector<NodeIndex>& v, NodeIndex e) {
                    return std::find(v.begin(), v.end(), e) != v.end();
                };
                CHECK(has(sets.active[tr.q], tr.i));
                CHECK(has(sets.active[tr.q], tr.j));
                CHECK(has(sets.active_elementary[tr.i], act[a]));
                CHECK_FALSE(has(sets.active_elementary[tr.i], act[a + 1]));
                CHECK(has(sets.active_elementary[tr.j], act[a + 1]));
                CHECK_FALSE(has(sets.active_elementary[tr.j], act[a]));
            }
        }
    }
}

TEST_CASE("b0 restricted to a section is concave")
{
    const BfTree tree = fx::example1_tree();
    const History hist = tree.make_history();
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> ux(-9, 9), ul(0, 1), ut(0, 11);
    int checked = 0, bad = 0;
    for (int s = 0; s < 5000; ++s) {
        const double t = ut(rng);
        const Eigen::VectorXd x = fx::vec({ux(rng), ux(rng)});
        const Eigen::VectorXd y = fx::vec({ux(rng), ux(rng)});
        const double lam = ul(rng);
        const Eigen::VectorXd z = lam * x + (1 - lam) * y;
        const auto ax = tree.active_sets(t, x, hist, 0).root_active_elementary();
        const auto ay = tree.active_sets(t, y, hist, 0).root_active_elementary();
        const auto az = tree.active_sets(t, z, hist, 0).root_active_elementary();
        if (ax.size() != 1 || ax != ay || ax != az)
            continue;
        ++checked;
        const double lhs = tree.eval_root(t, z, hist);
        const double rhs = lam * tree.eval_root(t, x, hist) + (1 - lam) * tree.eval_root(t, y, hist);
        if (lhs < rhs - 1e-9 * (1 + std::abs(rhs)))
            ++bad;
    }
    CHECK(checked > 500);
    CHECK(bad == 0);
}

TEST_CASE("labels switch to dot separators for wide nodes")
{
    PredicateRegistry reg;
    std::string text = "G[0,1](";
    for (int i = 0; i < 11; ++i) {
        reg.add(fx::ball("p" + std::to_string(i), 1, {0}, fx::vec({0}), 1 + i));
        text += (i ? " & p" : "p") + std::to_string(i);
    }
    text += ")";
    const BfTree tree = fx::tree_from(text, reg, {GammaParams{}});
    CHECK(tree.find("1.11").has_value());
    CHECK(tree.find("1.1").has_value());
}

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stlcbf/gamma.hpp"
#include "stlcbf/predicate.hpp"
#include "stlcbf/stl_ast.hpp"

namespace stlcbf {

using NodeIndex = std::size_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Construction rule a node came from.
///   Elementary  predicate leaf
///   PsiMin/Max  conjunction/disjunction without temporal operators
///   TemporalF/G eventually/always funnels
///   PhiMin      conjunction of temporal formulas (children drop out after their beta)
///   PhiMax      disjunction of temporal formulas (children drop out once negative)
enum class BfKind { Elementary, PsiMin, PsiMax, TemporalF, TemporalG, PhiMin, PhiMax };

bool is_min_kind(BfKind k);
bool is_max_kind(BfKind k);
std::string_view kind_name(BfKind k);

struct BfNode {
    std::string label;
    BfKind kind = BfKind::Elementary;
    std::vector<NodeIndex> children;
    std::optional<NodeIndex> parent;
    GammaFn gamma;
    /// Deactivation time with an empty history.
    double beta = kInf;
    double a = 0.0;
    double b = 0.0;
    /// Index into BfTree::predicates() for Elementary nodes.
    std::size_t predicate = 0;
};

class BfTree;

/// Per-disjunction record of children that have been negative along the
/// trajectory. Disqualification is permanent. Single writer.
class History {
public:
    History() = default;
    explicit History(std::size_t node_count) : disqualified_(node_count, 0) {}

    bool disqualified(NodeIndex i) const { return disqualified_.at(i) != 0; }
    double last_time() const { return last_time_; }
    std::size_t size() const { return disqualified_.size(); }
    std::size_t disqualified_count() const;

private:
    friend class BfTree;
    std::vector<char> disqualified_;
    double last_time_ = -kInf;
};

struct TreeOptions {
    /// Start t1 of the time domain; gamma functions are anchored here.
    double t_begin = 0.0;
    /// End t2 of the time domain; the horizon when nothing deactivates.
    double t_end = kInf;
};

/// Snapshot of all index sets at one (t, x).
struct IndexSets {
    double t = 0.0;
    std::vector<double> value;
    std::vector<double> beta;
    std::vector<std::vector<NodeIndex>> qualified;
    std::vector<std::vector<NodeIndex>> active;
    std::vector<std::vector<NodeIndex>> active_elementary;

    double root_value() const { return value.front(); }
    const std::vector<NodeIndex>& root_active_elementary() const { return active_elementary.front(); }
};

/// b_i^k = h_k + sum of gamma along Q_i^k, with its partial derivatives.
struct BranchValue {
    double value = 0.0;
    Eigen::VectorXd grad_x;
    double grad_t = 0.0;
    std::vector<NodeIndex> path;
};

/// q is the lowest common ancestor of leaves k and l; i and j are its
/// children heading towards k and l respectively.
struct BranchTriple {
    NodeIndex i = 0;
    NodeIndex j = 0;
    NodeIndex q = 0;
};

struct SwitchValue {
    double value = 0.0;
    Eigen::VectorXd grad_x;
    double grad_t = 0.0;
    BranchTriple triple;
};

class TreeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The nonsmooth barrier function b_0 compiled from a Phi (or Psi) formula.
///
/// Nodes are stored in preorder, so every child has a larger index than its
/// parent and the root is index 0. Leaves are labelled by appending the
/// 1-based child position to the parent label ("0" -> "2" -> "21" -> "211");
/// trees with a node of ten or more children use '.' separators instead.
class BfTree {
public:
    /// `gammas` lists one parameter set per temporal operator of `formula` in
    /// preorder. `formula` must be Until-free.
    static BfTree build(const Formula& formula, const PredicateRegistry& registry,
                        const std::vector<GammaParams>& gammas, const TreeOptions& opts = {});

    std::size_t size() const { return nodes_.size(); }
    NodeIndex root() const { return 0; }
    const BfNode& node(NodeIndex i) const;
    const std::vector<NodeIndex>& elementary() const { return elementary_; }
    std::optional<NodeIndex> find(std::string_view label) const;
    NodeIndex at(std::string_view label) const;
    const Predicate& predicate_of(NodeIndex leaf) const;
    const std::vector<Predicate>& predicates() const { return predicates_; }
    Eigen::Index state_dim() const { return state_dim_; }
    const TreeOptions& options() const { return opts_; }

    /// Time after which b_0 == 0.
    double horizon() const { return horizon_; }
    /// Finite static deactivation times, sorted and unique.
    std::vector<double> deactivation_times() const;

    History make_history() const { return History(nodes_.size()); }

    /// Deactivation times given the disqualifications in `hist`.
    std::vector<double> betas(const History& hist) const;
    std::vector<double> eval_all(double t, const Eigen::VectorXd& x, const History& hist) const;
    double eval(NodeIndex i, double t, const Eigen::VectorXd& x, const History& hist) const;
    double eval_root(double t, const Eigen::VectorXd& x, const History& hist) const { return eval(0, t, x, hist); }

    std::vector<NodeIndex> qualified_children(NodeIndex i, double t, const History& hist) const;
    /// Q_i^k ordered from i down to k; empty when no qualified branch connects them.
    std::vector<NodeIndex> path_set(NodeIndex i, NodeIndex k, double t, const History& hist) const;

    /// Activity is decided with |difference| <= tol_rel * (1 + |b_i|).
    IndexSets active_sets(double t, const Eigen::VectorXd& x, const History& hist, double tol_rel) const;

    /// Throws TreeError when Q_i^k is empty.
    BranchValue eval_branch(NodeIndex i, NodeIndex k, double t, const Eigen::VectorXd& x, const History& hist) const;
    BranchValue eval_bk(NodeIndex k, double t, const Eigen::VectorXd& x, const History& hist) const
    {
        return eval_branch(0, k, t, x, hist);
    }

    /// Structural triple from the lowest common ancestor; no activity check.
    BranchTriple lca_triple(NodeIndex k, NodeIndex l) const;
    /// Checked triple: k and l must be distinct members of I^{e,a}_0.
    BranchTriple branch_triple(NodeIndex k, NodeIndex l, const IndexSets& sets) const;

    SwitchValue switch_fn(const BranchTriple& tr, NodeIndex k, NodeIndex l, double t, const Eigen::VectorXd& x,
                          const History& hist) const;

    /// Permanently disqualifies disjunction children with b < -tol_rel * (1 + |b|).
    /// Returns the number of new disqualifications.
    std::size_t update_history(History& hist, double t, const Eigen::VectorXd& x, double tol_rel) const;

private:
    void check_history(const History& hist) const;

    std::vector<BfNode> nodes_;
    std::vector<Predicate> predicates_;
    std::vector<NodeIndex> elementary_;
    TreeOptions opts_;
    double horizon_ = kInf;
    Eigen::Index state_dim_ = 0;
};

}  // namespace stlcbf

#include "stlcbf/bf_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

namespace stlcbf {

bool is_min_kind(BfKind k)
{
    return k == BfKind::PsiMin || k == BfKind::PhiMin;
}

bool is_max_kind(BfKind k)
{
    return k == BfKind::PsiMax || k == BfKind::PhiMax;
}

std::string_view kind_name(BfKind k)
{
    switch (k) {
    case BfKind::Elementary:
        return "elementary";
    case BfKind::PsiMin:
        return "psi_min";
    case BfKind::PsiMax:
        return "psi_max";
    case BfKind::TemporalF:
        return "eventually";
    case BfKind::TemporalG:
        return "always";
    case BfKind::PhiMin:
        return "phi_min";
    case BfKind::PhiMax:
        return "phi_max";
    }
    return "?";
}

std::size_t History::disqualified_count() const
{
    return static_cast<std::size_t>(std::count(disqualified_.begin(), disqualified_.end(), char{1}));
}

namespace {

// Intermediate tree with `true` folded away.
struct Proto {
    BfKind kind = BfKind::Elementary;
    std::string pred;
    std::size_t gamma_index = 0;
    double a = 0.0;
    double b = 0.0;
    std::vector<std::unique_ptr<Proto>> children;
};

class ProtoBuilder {
public:
    explicit ProtoBuilder(std::size_t gamma_count) : gamma_count_(gamma_count) {}

    // nullptr stands for `true`
    std::unique_ptr<Proto> build(const Formula& f, Stratum s)
    {
        switch (f.kind) {
        case NodeKind::True:
            return nullptr;
        case NodeKind::Pred: {
            auto p = std::make_unique<Proto>();
            p->kind = BfKind::Elementary;
            p->pred = f.pred;
            return p;
        }
        case NodeKind::And:
        case NodeKind::Or: {
            const bool conj = f.kind == NodeKind::And;
            auto p = std::make_unique<Proto>();
            if (s == Stratum::Psi)
                p->kind = conj ? BfKind::PsiMin : BfKind::PsiMax;
            else
                p->kind = conj ? BfKind::PhiMin : BfKind::PhiMax;
            bool has_true = false;
            for (const auto& c : f.children) {
                auto cp = build(c, s);
                if (cp)
                    p->children.push_back(std::move(cp));
                else
                    has_true = true;
            }
            if (!conj && has_true)
                return nullptr;
            if (p->children.empty())
                return nullptr;
            return p;
        }
        case NodeKind::Eventually:
        case NodeKind::Always: {
            const std::size_t gi = next_gamma();
            auto child = build(f.children[0], Stratum::Psi);
            if (!child)
                return nullptr;
            auto p = std::make_unique<Proto>();
            p->kind = f.kind == NodeKind::Always ? BfKind::TemporalG : BfKind::TemporalF;
            p->gamma_index = gi;
            p->a = f.a;
            p->b = f.b;
            p->children.push_back(std::move(child));
            return p;
        }
        case NodeKind::Until:
            throw TreeError("Until must be desugared before building the barrier tree");
        }
        return nullptr;
    }

    std::size_t used() const { return next_; }

private:
    std::size_t next_gamma()
    {
        if (next_ >= gamma_count_)
            throw TreeError("missing gamma parameters for temporal operator #" + std::to_string(next_));
        return next_++;
    }

    std::size_t gamma_count_;
    std::size_t next_ = 0;
};

bool any_wide(const Proto& p)
{
    if (p.children.size() >= 10)
        return true;
    return std::any_of(p.children.begin(), p.children.end(), [](const auto& c) { return any_wide(*c); });
}

}  // namespace

BfTree BfTree::build(const Formula& formula, const PredicateRegistry& registry, const std::vector<GammaParams>& gammas,
                     const TreeOptions& opts)
{
    const StratumReport report = validate_fragment(formula);
    if (!(opts.t_end > opts.t_begin))
        throw TreeError("time domain must satisfy t_begin < t_end");

    ProtoBuilder pb(gammas.size());
    std::unique_ptr<Proto> root = pb.build(formula, report.stratum);
    if (pb.used() != gammas.size())
        throw TreeError("got " + std::to_string(gammas.size()) + " gamma parameter sets for " +
                        std::to_string(pb.used()) + " temporal operators");
    if (!root)
        throw TreeError("formula reduces to true; there is nothing to enforce");

    BfTree tree;
    tree.opts_ = opts;
    tree.state_dim_ = registry.state_dim();
    const bool dotted = any_wide(*root);

    std::function<NodeIndex(const Proto&, std::optional<NodeIndex>, std::string)> flatten =
        [&](const Proto& p, std::optional<NodeIndex> parent, std::string label) -> NodeIndex {
        const NodeIndex idx = tree.nodes_.size();
        tree.nodes_.emplace_back();
        {
            BfNode& n = tree.nodes_.back();
            n.label = label;
            n.kind = p.kind;
            n.parent = parent;
            n.a = p.a;
            n.b = p.b;
        }
        if (p.kind == BfKind::Elementary) {
            tree.nodes_[idx].predicate = tree.predicates_.size();
            tree.predicates_.push_back(registry.at(p.pred));
            tree.elementary_.push_back(idx);
        }
        if (p.kind == BfKind::TemporalF || p.kind == BfKind::TemporalG)
            tree.nodes_[idx].gamma = GammaFn(gammas[p.gamma_index], opts.t_begin);

        std::vector<NodeIndex> kids;
        for (std::size_t j = 0; j < p.children.size(); ++j) {
            const std::string pos = std::to_string(j + 1);
            std::string child_label;
            if (!parent)
                child_label = pos;
            else
                child_label = dotted ? label + "." + pos : label + pos;
            kids.push_back(flatten(*p.children[j], idx, child_label));
        }
        tree.nodes_[idx].children = std::move(kids);
        return idx;
    };
    flatten(*root, std::nullopt, "0");

    // static deactivation times, children first
    for (NodeIndex i = tree.nodes_.size(); i-- > 0;) {
        BfNode& n = tree.nodes_[i];
        switch (n.kind) {
        case BfKind::Elementary:
        case BfKind::PsiMin:
        case BfKind::PsiMax:
            n.beta = kInf;
            break;
        case BfKind::TemporalF: {
            const auto root_time = n.gamma.first_nonpositive();
            if (!root_time || *root_time > n.b)
                throw TreeError("eventually node " + n.label + " on [" + format_number(n.a) + "," +
                                format_number(n.b) + "]: gamma stays positive on the whole interval");
            if (*root_time < n.a)
                throw TreeError("eventually node " + n.label + ": gamma reaches 0 at t = " +
                                format_number(*root_time) + ", before the interval start " + format_number(n.a));
            n.beta = *root_time;
            break;
        }
        case BfKind::TemporalG:
            if (n.gamma.max_on(n.a, n.b) > 0.0)
                throw TreeError("always node " + n.label + ": gamma must be <= 0 on [" + format_number(n.a) + "," +
                                format_number(n.b) + "]");
            n.beta = n.b;
            break;
        case BfKind::PhiMin: {
            double m = -kInf;
            for (NodeIndex c : n.children)
                m = std::max(m, tree.nodes_[c].beta);
            n.beta = m;
            break;
        }
        case BfKind::PhiMax: {
            double m = kInf;
            for (NodeIndex c : n.children)
                m = std::min(m, tree.nodes_[c].beta);
            n.beta = m;
            break;
        }
        }
        if ((n.kind == BfKind::TemporalF || n.kind == BfKind::TemporalG) &&
            !n.gamma.is_c1_on(opts.t_begin, n.beta))
            throw TreeError("node " + n.label +
                            ": gamma has a kink before its deactivation time (use blend > 0 or move t_star)");
    }

    double horizon = -kInf;
    for (const auto& n : tree.nodes_)
        if (std::isfinite(n.beta))
            horizon = std::max(horizon, n.beta);
    tree.horizon_ = std::isfinite(horizon) ? horizon : opts.t_end;
    return tree;
}

const BfNode& BfTree::node(NodeIndex i) const
{
    if (i >= nodes_.size())
        throw std::out_of_range("unknown node index " + std::to_string(i));
    return nodes_[i];
}

std::optional<NodeIndex> BfTree::find(std::string_view label) const
{
    for (NodeIndex i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].label == label)
            return i;
    return std::nullopt;
}

NodeIndex BfTree::at(std::string_view label) const
{
    auto i = find(label);
    if (!i)
        throw std::out_of_range("unknown node label '" + std::string(label) + "'");
    return *i;
}

const Predicate& BfTree::predicate_of(NodeIndex leaf) const
{
    const BfNode& n = node(leaf);
    if (n.kind != BfKind::Elementary)
        throw TreeError("node " + n.label + " is not elementary");
    return predicates_[n.predicate];
}

std::vector<double> BfTree::deactivation_times() const
{
    std::vector<double> out;
    for (const auto& n : nodes_)
        if (std::isfinite(n.beta))
            out.push_back(n.beta);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void BfTree::check_history(const History& hist) const
{
    if (hist.size() != nodes_.size())
        throw std::invalid_argument("history does not belong to this tree");
}

std::vector<double> BfTree::betas(const History& hist) const
{
    check_history(hist);
    std::vector<double> beta(nodes_.size());
    for (NodeIndex i = nodes_.size(); i-- > 0;) {
        const BfNode& n = nodes_[i];
        switch (n.kind) {
        case BfKind::PhiMin: {
            double m = -kInf;
            for (NodeIndex c : n.children)
                m = std::max(m, beta[c]);
            beta[i] = m;
            break;
        }
        case BfKind::PhiMax: {
            double m = kInf;
            bool any = false;
            for (NodeIndex c : n.children) {
                if (hist.disqualified(c))
                    continue;
                any = true;
                m = std::min(m, beta[c]);
            }
            // min over an empty set is 0
            beta[i] = any ? m : 0.0;
            break;
        }
        default:
            beta[i] = n.beta;
        }
    }
    return beta;
}

namespace {

struct Evaluated {
    std::vector<double> value;
    std::vector<double> beta;
};

}  // namespace

static Evaluated evaluate(const std::vector<BfNode>& nodes, const std::vector<Predicate>& preds,
                          const std::vector<double>& beta, double t, const Eigen::VectorXd& x, const History& hist)
{
    Evaluated ev;
    ev.beta = beta;
    ev.value.assign(nodes.size(), 0.0);
    for (NodeIndex i = nodes.size(); i-- > 0;) {
        const BfNode& n = nodes[i];
        double v = 0.0;
        switch (n.kind) {
        case BfKind::Elementary:
            v = preds[n.predicate].eval(x);
            break;
        case BfKind::PsiMin:
            v = kInf;
            for (NodeIndex c : n.children)
                v = std::min(v, ev.value[c]);
            break;
        case BfKind::PsiMax:
            v = -kInf;
            for (NodeIndex c : n.children)
                v = std::max(v, ev.value[c]);
            break;
        case BfKind::TemporalF:
        case BfKind::TemporalG:
            v = t > beta[i] ? 0.0 : ev.value[n.children[0]] + n.gamma.eval(t);
            break;
        case BfKind::PhiMin: {
            bool any = false;
            v = kInf;
            for (NodeIndex c : n.children) {
                if (t <= beta[c]) {
                    any = true;
                    v = std::min(v, ev.value[c]);
                }
            }
            if (!any)
                v = 0.0;
            break;
        }
        case BfKind::PhiMax: {
            if (t > beta[i]) {
                v = 0.0;
                break;
            }
            bool any = false;
            v = -kInf;
            for (NodeIndex c : n.children) {
                if (!hist.disqualified(c)) {
                    any = true;
                    v = std::max(v, ev.value[c]);
                }
            }
            if (!any)
                v = 0.0;
            break;
        }
        }
        ev.value[i] = v;
    }
    return ev;
}

std::vector<double> BfTree::eval_all(double t, const Eigen::VectorXd& x, const History& hist) const
{
    return evaluate(nodes_, predicates_, betas(hist), t, x, hist).value;
}

double BfTree::eval(NodeIndex i, double t, const Eigen::VectorXd& x, const History& hist) const
{
    node(i);
    return eval_all(t, x, hist)[i];
}

std::vector<NodeIndex> BfTree::qualified_children(NodeIndex i, double t, const History& hist) const
{
    const BfNode& n = node(i);
    check_history(hist);
    if (n.kind == BfKind::PhiMin) {
        const auto beta = betas(hist);
        std::vector<NodeIndex> out;
        for (NodeIndex c : n.children)
            if (t <= beta[c])
                out.push_back(c);
        return out;
    }
    if (n.kind == BfKind::PhiMax) {
        std::vector<NodeIndex> out;
        for (NodeIndex c : n.children)
            if (!hist.disqualified(c))
                out.push_back(c);
        return out;
    }
    return n.children;
}

namespace {

bool is_qualified(const BfNode& parent, NodeIndex c, double t, const std::vector<double>& beta, const History& hist)
{
    if (parent.kind == BfKind::PhiMin)
        return t <= beta[c];
    if (parent.kind == BfKind::PhiMax)
        return !hist.disqualified(c);
    return true;
}

}  // namespace

std::vector<NodeIndex> BfTree::path_set(NodeIndex i, NodeIndex k, double t, const History& hist) const
{
    node(i);
    node(k);
    const auto beta = betas(hist);
    std::vector<NodeIndex> path{k};
    NodeIndex cur = k;
    while (cur != i) {
        const auto& parent = nodes_[cur].parent;
        if (!parent)
            return {};
        if (!is_qualified(nodes_[*parent], cur, t, beta, hist))
            return {};
        cur = *parent;
        path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

IndexSets BfTree::active_sets(double t, const Eigen::VectorXd& x, const History& hist, double tol_rel) const
{
    if (tol_rel < 0.0)
        throw std::invalid_argument("activity tolerance must be >= 0");
    Evaluated ev = evaluate(nodes_, predicates_, betas(hist), t, x, hist);

    IndexSets s;
    s.t = t;
    const std::size_t n = nodes_.size();
    s.qualified.resize(n);
    s.active.resize(n);
    s.active_elementary.resize(n);

    for (NodeIndex i = n; i-- > 0;) {
        const BfNode& nd = nodes_[i];
        if (nd.kind == BfKind::Elementary) {
            s.active_elementary[i] = {i};
            continue;
        }
        const double gamma = nd.gamma.eval(t);
        const double tol = tol_rel * (1.0 + std::abs(ev.value[i]));
        for (NodeIndex c : nd.children) {
            if (!is_qualified(nd, c, t, ev.beta, hist))
                continue;
            s.qualified[i].push_back(c);
            if (std::abs(ev.value[i] - (ev.value[c] + gamma)) <= tol) {
                s.active[i].push_back(c);
                const auto& sub = s.active_elementary[c];
                s.active_elementary[i].insert(s.active_elementary[i].end(), sub.begin(), sub.end());
            }
        }
        std::sort(s.active_elementary[i].begin(), s.active_elementary[i].end());
    }
    s.value = std::move(ev.value);
    s.beta = std::move(ev.beta);
    return s;
}

BranchValue BfTree::eval_branch(NodeIndex i, NodeIndex k, double t, const Eigen::VectorXd& x,
                                const History& hist) const
{
    const BfNode& leaf = node(k);
    if (leaf.kind != BfKind::Elementary)
        throw TreeError("node " + leaf.label + " is not elementary");
    BranchValue bv;
    bv.path = path_set(i, k, t, hist);
    if (bv.path.empty())
        throw TreeError("empty path set from node " + node(i).label + " to leaf " + leaf.label);
    const Predicate& h = predicates_[leaf.predicate];
    bv.value = h.eval(x);
    bv.grad_x = h.grad(x);
    for (NodeIndex p : bv.path) {
        const GammaFn& g = nodes_[p].gamma;
        if (g.is_zero())
            continue;
        bv.value += g.eval(t);
        bv.grad_t += g.deriv(t);
    }
    return bv;
}

BranchTriple BfTree::lca_triple(NodeIndex k, NodeIndex l) const
{
    node(k);
    node(l);
    if (k == l)
        throw TreeError("branch triple needs two distinct leaves");
    auto chain = [&](NodeIndex v) {
        std::vector<NodeIndex> c{v};
        while (nodes_[v].parent) {
            v = *nodes_[v].parent;
            c.push_back(v);
        }
        std::reverse(c.begin(), c.end());
        return c;
    };
    const auto ck = chain(k);
    const auto cl = chain(l);
    std::size_t d = 0;
    while (d < ck.size() && d < cl.size() && ck[d] == cl[d])
        ++d;
    if (d == ck.size() || d == cl.size())
        throw TreeError("leaf " + nodes_[k].label + " and " + nodes_[l].label + " lie on one branch");
    return BranchTriple{ck[d], cl[d], ck[d - 1]};
}

BranchTriple BfTree::branch_triple(NodeIndex k, NodeIndex l, const IndexSets& sets) const
{
    const auto& act = sets.root_active_elementary();
    auto in = [&](NodeIndex v) { return std::binary_search(act.begin(), act.end(), v); };
    if (!in(k) || !in(l))
        throw TreeError("branch triple requires both leaves in the active elementary set");
    BranchTriple tr = lca_triple(k, l);
    const auto& aq = sets.active[tr.q];
    auto contains = [](const std::vector<NodeIndex>& v, NodeIndex e) {
        return std::find(v.begin(), v.end(), e) != v.end();
    };
    if (!contains(aq, tr.i) || !contains(aq, tr.j) || !contains(sets.active_elementary[tr.i], k) ||
        !contains(sets.active_elementary[tr.j], l))
        throw TreeError("inconsistent active sets for leaves " + nodes_[k].label + ", " + nodes_[l].label);
    return tr;
}

SwitchValue BfTree::switch_fn(const BranchTriple& tr, NodeIndex k, NodeIndex l, double t, const Eigen::VectorXd& x,
                              const History& hist) const
{
    const BfKind qk = node(tr.q).kind;
    if (!is_min_kind(qk) && !is_max_kind(qk))
        throw TreeError("branching node " + nodes_[tr.q].label + " is neither a min nor a max node");
    const BranchValue bk = eval_branch(tr.i, k, t, x, hist);
    const BranchValue bl = eval_branch(tr.j, l, t, x, hist);
    const double sign = is_min_kind(qk) ? -1.0 : 1.0;
    SwitchValue sv;
    sv.triple = tr;
    sv.value = sign * (bk.value - bl.value);
    sv.grad_x = sign * (bk.grad_x - bl.grad_x);
    sv.grad_t = sign * (bk.grad_t - bl.grad_t);
    return sv;
}

std::size_t BfTree::update_history(History& hist, double t, const Eigen::VectorXd& x, double tol_rel) const
{
    check_history(hist);
    if (t < hist.last_time_)
        throw std::invalid_argument("history update at t = " + format_number(t) +
                                    " precedes the last update at t = " + format_number(hist.last_time_));
    hist.last_time_ = t;

    std::size_t added = 0;
    Evaluated ev = evaluate(nodes_, predicates_, betas(hist), t, x, hist);
    for (NodeIndex i = nodes_.size(); i-- > 0;) {
        const BfNode& n = nodes_[i];
        if (n.kind != BfKind::PhiMax || t > ev.beta[i])
            continue;
        bool changed = false;
        for (NodeIndex c : n.children) {
            if (hist.disqualified(c))
                continue;
            const double v = ev.value[c];
            if (v < -tol_rel * (1.0 + std::abs(v))) {
                hist.disqualified_[c] = 1;
                changed = true;
                ++added;
            }
        }
        if (changed)
            ev = evaluate(nodes_, predicates_, betas(hist), t, x, hist);
    }
    return added;
}

}  // namespace stlcbf

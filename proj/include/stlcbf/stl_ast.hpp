#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stlcbf/predicate.hpp"

namespace stlcbf {

enum class NodeKind { True, Pred, And, Or, Eventually, Always, Until };

/// Psi: boolean combination of predicates. Phi: temporal layer over Psi.
enum class Stratum { Psi, Phi };

/// AST of the supported STL fragment.
///
/// Interval bounds are absolute times in seconds (the fragment is only ever
/// evaluated at t = 0). And/Or are n-ary; temporal operators have one child;
/// Until has two (left, right).
struct Formula {
    NodeKind kind = NodeKind::True;
    std::string pred;
    double a = 0.0;
    double b = 0.0;
    std::vector<Formula> children;

    bool operator==(const Formula&) const = default;

    static Formula truth();
    static Formula atom(std::string id);
    static Formula conj(std::vector<Formula> cs);
    static Formula disj(std::vector<Formula> cs);
    static Formula eventually(double a, double b, Formula c);
    static Formula always(double a, double b, Formula c);
    static Formula until(double a, double b, Formula left, Formula right);

    bool is_temporal() const
    {
        return kind == NodeKind::Eventually || kind == NodeKind::Always || kind == NodeKind::Until;
    }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos)
    {
    }
    std::size_t position;
};

class FragmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StratumReport {
    Stratum stratum = Stratum::Psi;
    std::set<std::string> predicates;
};

/// Parses `G[a,b](...)`, `F[a,b](...)`, infix `U[a,b]`, `&`, `|`, `true`,
/// parentheses and bare predicate identifiers. Precedence: U > & > |.
/// Symbols bound to box_inf constraints expand to a conjunction of atoms.
Formula parse_formula(std::string_view text, const PredicateRegistry& registry);

/// Throws FragmentError naming the offending subformula.
StratumReport validate_fragment(const Formula& f);

/// Witness time t' for each Until node, keyed by the node's preorder
/// occurrence index. Unlisted nodes use t' = b.
struct WitnessPolicy {
    std::map<std::size_t, double> overrides;
};

/// Rewrites each Until(a,b,l,r) into And(Always(0,t',l), Eventually(a,t',r)).
Formula desugar_until(const Formula& f, const WitnessPolicy& policy = {});

/// Temporal operators in preorder (text order).
std::vector<const Formula*> temporal_nodes(const Formula& f);

std::string to_string(const Formula& f);
std::string format_number(double v);

}  // namespace stlcbf

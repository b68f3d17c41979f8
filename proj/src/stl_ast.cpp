#include "stlcbf/stl_ast.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace stlcbf {

Formula Formula::truth()
{
    return Formula{};
}

Formula Formula::atom(std::string id)
{
    Formula f;
    f.kind = NodeKind::Pred;
    f.pred = std::move(id);
    return f;
}

Formula Formula::conj(std::vector<Formula> cs)
{
    Formula f;
    f.kind = NodeKind::And;
    f.children = std::move(cs);
    return f;
}

Formula Formula::disj(std::vector<Formula> cs)
{
    Formula f;
    f.kind = NodeKind::Or;
    f.children = std::move(cs);
    return f;
}

Formula Formula::eventually(double a, double b, Formula c)
{
    Formula f;
    f.kind = NodeKind::Eventually;
    f.a = a;
    f.b = b;
    f.children.push_back(std::move(c));
    return f;
}

Formula Formula::always(double a, double b, Formula c)
{
    Formula f;
    f.kind = NodeKind::Always;
    f.a = a;
    f.b = b;
    f.children.push_back(std::move(c));
    return f;
}

Formula Formula::until(double a, double b, Formula left, Formula right)
{
    Formula f;
    f.kind = NodeKind::Until;
    f.a = a;
    f.b = b;
    f.children.push_back(std::move(left));
    f.children.push_back(std::move(right));
    return f;
}

namespace {

class Parser {
public:
    Parser(std::string_view text, const PredicateRegistry& reg) : s_(text), reg_(reg) {}

    Formula parse()
    {
        Formula f = parse_or();
        skip_ws();
        if (pos_ != s_.size())
            throw ParseError(std::string("unexpected '") + s_[pos_] + "'", pos_);
        return f;
    }

private:
    void skip_ws()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool peek(char c)
    {
        skip_ws();
        return pos_ < s_.size() && s_[pos_] == c;
    }

    void expect(char c)
    {
        skip_ws();
        if (pos_ >= s_.size())
            throw ParseError(std::string("expected '") + c + "' but reached end of input", pos_);
        if (s_[pos_] != c)
            throw ParseError(std::string("expected '") + c + "' but found '" + s_[pos_] + "'", pos_);
        ++pos_;
    }

    // operator letter immediately followed by '[' (whitespace allowed)
    bool at_operator(char letter)
    {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != letter)
            return false;
        std::size_t p = pos_ + 1;
        while (p < s_.size() && std::isspace(static_cast<unsigned char>(s_[p])))
            ++p;
        return p < s_.size() && s_[p] == '[';
    }

    double number()
    {
        skip_ws();
        const char* first = s_.data() + pos_;
        const char* last = s_.data() + s_.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || !std::isfinite(v))
            throw ParseError("expected a finite number", pos_);
        pos_ += static_cast<std::size_t>(ptr - first);
        return v;
    }

    std::pair<double, double> interval()
    {
        const std::size_t start = pos_;
        expect('[');
        const double a = number();
        expect(',');
        const double b = number();
        expect(']');
        if (a < 0.0)
            throw ParseError("interval lower bound must be >= 0", start);
        if (a > b)
            throw ParseError("interval violation: a = " + format_number(a) + " > b = " + format_number(b), start);
        return {a, b};
    }

    Formula parse_or()
    {
        std::vector<Formula> cs;
        cs.push_back(parse_and());
        while (peek('|')) {
            ++pos_;
            cs.push_back(parse_and());
        }
        return cs.size() == 1 ? std::move(cs.front()) : Formula::disj(std::move(cs));
    }

    Formula parse_and()
    {
        std::vector<Formula> cs;
        cs.push_back(parse_until());
        while (peek('&')) {
            ++pos_;
            cs.push_back(parse_until());
        }
        return cs.size() == 1 ? std::move(cs.front()) : Formula::conj(std::move(cs));
    }

    Formula parse_until()
    {
        Formula left = parse_primary();
        if (at_operator('U')) {
            ++pos_;
            auto [a, b] = interval();
            Formula right = parse_primary();
            if (at_operator('U'))
                throw ParseError("chained Until requires parentheses", pos_);
            return Formula::until(a, b, std::move(left), std::move(right));
        }
        return left;
    }

    Formula parse_primary()
    {
        skip_ws();
        if (pos_ >= s_.size())
            throw ParseError("unexpected end of input", pos_);
        const char c = s_[pos_];
        if (c == '!' || c == '~')
            throw ParseError("negation is outside the supported fragment", pos_);
        if (c == '(') {
            ++pos_;
            Formula f = parse_or();
            expect(')');
            return f;
        }
        if (at_operator('G') || at_operator('F')) {
            const bool always = s_[pos_] == 'G';
            ++pos_;
            auto [a, b] = interval();
            expect('(');
            Formula child = parse_or();
            expect(')');
            return always ? Formula::always(a, b, std::move(child)) : Formula::eventually(a, b, std::move(child));
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string id(s_.substr(start, pos_ - start));
            if (id == "true")
                return Formula::truth();
            if (!reg_.contains(id))
                throw ParseError("unbound predicate symbol '" + id + "'", start);
            const auto& parts = reg_.expansion(id);
            if (parts.size() == 1)
                return Formula::atom(parts.front());
            std::vector<Formula> atoms;
            for (const auto& p : parts)
                atoms.push_back(Formula::atom(p));
            return Formula::conj(std::move(atoms));
        }
        throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }

    std::string_view s_;
    const PredicateRegistry& reg_;
    std::size_t pos_ = 0;
};

StratumReport validate_rec(const Formula& f)
{
    StratumReport r;
    switch (f.kind) {
    case NodeKind::True:
        r.stratum = Stratum::Psi;
        return r;
    case NodeKind::Pred:
        r.stratum = Stratum::Psi;
        r.predicates.insert(f.pred);
        return r;
    case NodeKind::And:
    case NodeKind::Or: {
        if (f.children.empty())
            throw FragmentError("empty boolean operator in '" + to_string(f) + "'");
        bool any_psi = false;
        bool any_phi = false;
        for (const auto& c : f.children) {
            StratumReport cr = validate_rec(c);
            (cr.stratum == Stratum::Psi ? any_psi : any_phi) = true;
            r.predicates.insert(cr.predicates.begin(), cr.predicates.end());
        }
        if (any_psi && any_phi)
            throw FragmentError("boolean operator mixes temporal and non-temporal operands in '" + to_string(f) +
                                "' (wrap the state constraint in G[0,0](...))");
        r.stratum = any_phi ? Stratum::Phi : Stratum::Psi;
        return r;
    }
    case NodeKind::Eventually:
    case NodeKind::Always:
    case NodeKind::Until: {
        if (f.a < 0.0 || f.a > f.b)
            throw FragmentError("invalid interval in '" + to_string(f) + "'");
        const std::size_t want = f.kind == NodeKind::Until ? 2 : 1;
        if (f.children.size() != want)
            throw FragmentError("wrong operand count in '" + to_string(f) + "'");
        for (const auto& c : f.children) {
            StratumReport cr = validate_rec(c);
            if (cr.stratum != Stratum::Psi)
                throw FragmentError("nested temporal operator in '" + to_string(f) + "'");
            r.predicates.insert(cr.predicates.begin(), cr.predicates.end());
        }
        r.stratum = Stratum::Phi;
        return r;
    }
    }
    throw FragmentError("unknown node kind");
}

Formula desugar_rec(const Formula& f, const WitnessPolicy& policy, std::size_t& until_index)
{
    if (f.kind == NodeKind::Until) {
        const std::size_t idx = until_index++;
        double tp = f.b;
        if (auto it = policy.overrides.find(idx); it != policy.overrides.end())
            tp = it->second;
        if (!(tp >= f.a && tp <= f.b))
            throw std::invalid_argument("Until witness time " + format_number(tp) + " outside [" +
                                        format_number(f.a) + "," + format_number(f.b) + "]");
        Formula l = desugar_rec(f.children[0], policy, until_index);
        Formula r = desugar_rec(f.children[1], policy, until_index);
        return Formula::conj({Formula::always(0.0, tp, std::move(l)), Formula::eventually(f.a, tp, std::move(r))});
    }
    Formula out = f;
    for (auto& c : out.children)
        c = desugar_rec(c, policy, until_index);
    return out;
}

void temporal_rec(const Formula& f, std::vector<const Formula*>& out)
{
    if (f.is_temporal())
        out.push_back(&f);
    for (const auto& c : f.children)
        temporal_rec(c, out);
}

bool needs_parens(const Formula& child)
{
    return child.kind == NodeKind::And || child.kind == NodeKind::Or || child.kind == NodeKind::Until;
}

void print_rec(const Formula& f, std::string& out)
{
    auto operand = [&](const Formula& c) {
        if (needs_parens(c)) {
            out += '(';
            print_rec(c, out);
            out += ')';
        } else {
            print_rec(c, out);
        }
    };
    auto interval = [&](const Formula& g) { out += '[' + format_number(g.a) + ',' + format_number(g.b) + ']'; };

    switch (f.kind) {
    case NodeKind::True:
        out += "true";
        break;
    case NodeKind::Pred:
        out += f.pred;
        break;
    case NodeKind::And:
    case NodeKind::Or:
        for (std::size_t i = 0; i < f.children.size(); ++i) {
            if (i)
                out += f.kind == NodeKind::And ? " & " : " | ";
            operand(f.children[i]);
        }
        break;
    case NodeKind::Eventually:
    case NodeKind::Always:
        out += f.kind == NodeKind::Always ? 'G' : 'F';
        interval(f);
        out += '(';
        print_rec(f.children[0], out);
        out += ')';
        break;
    case NodeKind::Until:
        operand(f.children[0]);
        out += " U";
        interval(f);
        out += ' ';
        operand(f.children[1]);
        break;
    }
}

}  // namespace

Formula parse_formula(std::string_view text, const PredicateRegistry& registry)
{
    Formula f = Parser(text, registry).parse();
    validate_fragment(f);
    return f;
}

StratumReport validate_fragment(const Formula& f)
{
    return validate_rec(f);
}

Formula desugar_until(const Formula& f, const WitnessPolicy& policy)
{
    std::size_t idx = 0;
    return desugar_rec(f, policy, idx);
}

std::vector<const Formula*> temporal_nodes(const Formula& f)
{
    std::vector<const Formula*> out;
    temporal_rec(f, out);
    return out;
}

std::string to_string(const Formula& f)
{
    std::string out;
    print_rec(f, out);
    return out;
}

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace stlcbf

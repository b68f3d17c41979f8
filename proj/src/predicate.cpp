#include "stlcbf/predicate.hpp"

#include <stdexcept>

namespace stlcbf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Predicate::Predicate(std::string id, PredicateForm form) : id_(std::move(id)), form_(std::move(form))
{
    std::visit(overloaded{
                   [&](const Ball2& b) {
                       if (b.selector.rows() != b.center.size())
                           throw std::invalid_argument("predicate '" + id_ + "': selector rows != center size");
                       if (b.radius < 0.0)
                           throw std::invalid_argument("predicate '" + id_ + "': negative radius");
                   },
                   [&](const Affine& a) {
                       if (a.a.size() == 0)
                           throw std::invalid_argument("predicate '" + id_ + "': empty coefficient vector");
                   },
               },
               form_);
}

Eigen::Index Predicate::state_dim() const
{
    return std::visit(overloaded{
                          [](const Ball2& b) { return b.selector.cols(); },
                          [](const Affine& a) { return a.a.size(); },
                      },
                      form_);
}

double Predicate::eval(const Eigen::VectorXd& x) const
{
    return std::visit(overloaded{
                          [&](const Ball2& b) {
                              const Eigen::VectorXd e = b.selector * x - b.center;
                              return b.radius * b.radius - e.squaredNorm();
                          },
                          [&](const Affine& a) { return a.a.dot(x) + a.d; },
                      },
                      form_);
}

Eigen::VectorXd Predicate::grad(const Eigen::VectorXd& x) const
{
    return std::visit(overloaded{
                          [&](const Ball2& b) -> Eigen::VectorXd {
                              const Eigen::VectorXd e = b.selector * x - b.center;
                              return -2.0 * (b.selector.transpose() * e);
                          },
                          [&](const Affine& a) -> Eigen::VectorXd { return a.a; },
                      },
                      form_);
}

std::optional<double> Predicate::max_value() const
{
    return std::visit(overloaded{
                          [](const Ball2& b) -> std::optional<double> { return b.radius * b.radius; },
                          [](const Affine& a) -> std::optional<double> {
                              if (a.a.isZero(0.0))
                                  return a.d;
                              return std::nullopt;
                          },
                      },
                      form_);
}

void PredicateRegistry::check_dim(Eigen::Index n, const std::string& id)
{
    if (state_dim_ < 0)
        state_dim_ = n;
    else if (state_dim_ != n)
        throw std::invalid_argument("predicate '" + id + "' has state dimension " + std::to_string(n) +
                                    ", registry uses " + std::to_string(state_dim_));
}

void PredicateRegistry::add(Predicate p)
{
    const std::string id = p.id();
    if (expansions_.count(id))
        throw std::invalid_argument("duplicate predicate symbol '" + id + "'");
    check_dim(p.state_dim(), id);
    expansions_[id] = {id};
    atomic_.emplace(id, std::move(p));
}

void PredicateRegistry::add_box_inf(const std::string& id, const BoxInf& box)
{
    if (expansions_.count(id))
        throw std::invalid_argument("duplicate predicate symbol '" + id + "'");
    if (box.selector.rows() != box.center.size())
        throw std::invalid_argument("predicate '" + id + "': selector rows != center size");
    check_dim(box.selector.cols(), id);

    // r - (S x - c)_j >= 0 and r + (S x - c)_j >= 0 for each row j
    std::vector<std::string> parts;
    int part = 0;
    for (Eigen::Index j = 0; j < box.selector.rows(); ++j) {
        for (double sign : {-1.0, 1.0}) {
            Affine a;
            a.a = sign * box.selector.row(j).transpose();
            a.d = box.radius - sign * box.center(j);
            std::string pid = id + "__" + std::to_string(part++);
            if (expansions_.count(pid))
                throw std::invalid_argument("box_inf expansion collides with symbol '" + pid + "'");
            atomic_.emplace(pid, Predicate(pid, a));
            expansions_[pid] = {pid};
            parts.push_back(pid);
        }
    }
    expansions_[id] = std::move(parts);
}

bool PredicateRegistry::contains(const std::string& symbol) const
{
    return expansions_.count(symbol) > 0;
}

bool PredicateRegistry::is_atomic(const std::string& symbol) const
{
    return atomic_.count(symbol) > 0;
}

const std::vector<std::string>& PredicateRegistry::expansion(const std::string& symbol) const
{
    auto it = expansions_.find(symbol);
    if (it == expansions_.end())
        throw std::out_of_range("unbound predicate symbol '" + symbol + "'");
    return it->second;
}

const Predicate& PredicateRegistry::at(const std::string& atomic_id) const
{
    auto it = atomic_.find(atomic_id);
    if (it == atomic_.end())
        throw std::out_of_range("unknown atomic predicate '" + atomic_id + "'");
    return it->second;
}

std::vector<std::string> PredicateRegistry::symbols() const
{
    std::vector<std::string> out;
    for (const auto& [k, v] : expansions_)
        out.push_back(k);
    return out;
}

}  // namespace stlcbf

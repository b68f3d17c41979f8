#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace stlcbf {

/// h(x) = r^2 - ||S x - c||^2. Concave and C^1 everywhere, maximum r^2 on {S x = c}.
struct Ball2 {
    Eigen::MatrixXd selector;
    Eigen::VectorXd center;
    double radius = 0.0;
};

/// h(x) = a^T x + d.
struct Affine {
    Eigen::VectorXd a;
    double d = 0.0;
};

using PredicateForm = std::variant<Ball2, Affine>;

/// A concave C^1 predicate function h_k with analytic gradient.
class Predicate {
public:
    Predicate(std::string id, PredicateForm form);

    const std::string& id() const { return id_; }
    const PredicateForm& form() const { return form_; }
    Eigen::Index state_dim() const;

    double eval(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(const Eigen::VectorXd& x) const;

    /// Supremum of h over the state space, if finite.
    std::optional<double> max_value() const;

private:
    std::string id_;
    PredicateForm form_;
};

/// Box constraint ||S x - c||_inf <= r. Not C^1 as a single function, so it is
/// bound as a conjunction of 2k affine predicates named `<id>__<j>`.
struct BoxInf {
    Eigen::MatrixXd selector;
    Eigen::VectorXd center;
    double radius = 0.0;
};

/// Maps formula symbols to predicates. A symbol is either atomic or a
/// conjunction of atomic predicates (box_inf expansion).
class PredicateRegistry {
public:
    void add(Predicate p);
    void add_box_inf(const std::string& id, const BoxInf& box);

    bool contains(const std::string& symbol) const;
    bool is_atomic(const std::string& symbol) const;
    /// Atomic ids a symbol expands to (a single id for atomic symbols).
    const std::vector<std::string>& expansion(const std::string& symbol) const;
    const Predicate& at(const std::string& atomic_id) const;

    std::vector<std::string> symbols() const;
    Eigen::Index state_dim() const { return state_dim_; }

private:
    void check_dim(Eigen::Index n, const std::string& id);

    std::map<std::string, Predicate> atomic_;
    std::map<std::string, std::vector<std::string>> expansions_;
    Eigen::Index state_dim_ = -1;
};

}  // namespace stlcbf

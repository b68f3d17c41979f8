#include "stlcbf/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stlcbf {

GammaFn::GammaFn(const GammaParams& p, double t1) : p_(p), t1_(t1), zero_(false)
{
    if (!std::isfinite(p.gamma_zero) || !std::isfinite(p.gamma_inf) || !std::isfinite(p.t_star) ||
        !std::isfinite(p.blend))
        throw std::invalid_argument("gamma parameters must be finite");
    if (p.blend < 0.0)
        throw std::invalid_argument("gamma blend width must be >= 0");

    if (p.gamma_zero == p.gamma_inf) {
        shape_ = Shape::Constant;
        zero_ = p.gamma_zero == 0.0;
        return;
    }
    if (!(p.t_star > t1))
        throw std::invalid_argument("gamma t_star must be later than the start time");
    slope_ = (p.gamma_inf - p.gamma_zero) / (p.t_star - t1);
    if (p.affine) {
        shape_ = Shape::Affine;
    } else if (p.blend > 0.0) {
        if (p.t_star - p.blend < t1)
            throw std::invalid_argument("gamma blend region starts before the start time");
        shape_ = Shape::SmoothClamp;
    } else {
        shape_ = Shape::Clamp;
    }
}

double GammaFn::eval(double t) const
{
    switch (shape_) {
    case Shape::Constant:
        return p_.gamma_zero;
    case Shape::Affine:
        return p_.gamma_zero + slope_ * (t - t1_);
    case Shape::Clamp:
        return t <= p_.t_star ? p_.gamma_zero + slope_ * (t - t1_) : p_.gamma_inf;
    case Shape::SmoothClamp: {
        const double w = p_.blend;
        if (t <= p_.t_star - w)
            return p_.gamma_zero + slope_ * (t - t1_);
        if (t >= p_.t_star + w)
            return p_.gamma_inf;
        const double s = p_.t_star + w - t;
        return p_.gamma_inf - slope_ * s * s / (4.0 * w);
    }
    }
    return 0.0;
}

double GammaFn::deriv(double t) const
{
    switch (shape_) {
    case Shape::Constant:
        return 0.0;
    case Shape::Affine:
        return slope_;
    case Shape::Clamp:
        return t <= p_.t_star ? slope_ : 0.0;
    case Shape::SmoothClamp: {
        const double w = p_.blend;
        if (t <= p_.t_star - w)
            return slope_;
        if (t > p_.t_star + w)
            return 0.0;
        return slope_ * (p_.t_star + w - t) / (2.0 * w);
    }
    }
    return 0.0;
}

std::optional<double> GammaFn::first_nonpositive() const
{
    if (eval(t1_) <= 0.0)
        return t1_;
    if (shape_ == Shape::Constant || slope_ >= 0.0)
        return std::nullopt;

    const double linear_root = t1_ + p_.gamma_zero / (-slope_);
    switch (shape_) {
    case Shape::Affine:
        return linear_root;
    case Shape::Clamp:
        if (linear_root <= p_.t_star)
            return linear_root;
        return std::nullopt;
    case Shape::SmoothClamp: {
        const double w = p_.blend;
        if (linear_root <= p_.t_star - w)
            return linear_root;
        if (p_.gamma_inf > 0.0)
            return std::nullopt;
        if (p_.gamma_inf == 0.0)
            return p_.t_star + w;
        const double s = std::sqrt(4.0 * w * p_.gamma_inf / slope_);
        return p_.t_star + w - s;
    }
    default:
        return std::nullopt;
    }
}

double GammaFn::max_on(double lo, double hi) const
{
    // gamma is monotone for every shape
    return std::max(eval(lo), eval(hi));
}

double GammaFn::max_decrease_rate(double lo, double hi) const
{
    // -gamma' is monotone as well; the left derivative at lo covers the
    // left-sided convention used by the controller
    return std::max(-deriv(lo), -deriv(hi));
}

bool GammaFn::is_c1_on(double lo, double hi) const
{
    if (shape_ != Shape::Clamp)
        return true;
    return !(p_.t_star > lo && p_.t_star < hi);
}

}  // namespace stlcbf

#pragma once

#include <optional>

namespace stlcbf {

/// Parameters of the time funnel added by a temporal operator.
///
/// gamma(t) = gamma_inf + (gamma_zero - gamma_inf) * max(0, (t_star - t) / (t_star - t1))
///
/// `affine` drops the clamp (straight line through both points). `blend > 0`
/// replaces the kink at t_star by a quadratic on [t_star - blend, t_star + blend],
/// which keeps gamma C^1.
struct GammaParams {
    double gamma_zero = 0.0;
    double gamma_inf = 0.0;
    double t_star = 0.0;
    double blend = 0.0;
    bool affine = false;

    bool operator==(const GammaParams&) const = default;
};

/// Monotone C^1 (or clamped) time function. All queries are closed form.
class GammaFn {
public:
    /// gamma == 0.
    GammaFn() = default;
    GammaFn(const GammaParams& p, double t1);

    static GammaFn zero() { return GammaFn(); }

    double eval(double t) const;
    /// Left-sided derivative (equal to the derivative wherever gamma is C^1).
    double deriv(double t) const;

    /// min{ t >= t1 | gamma(t) <= 0 }, if it exists.
    std::optional<double> first_nonpositive() const;
    /// max of gamma over [lo, hi].
    double max_on(double lo, double hi) const;
    /// max of -d gamma/dt over [lo, hi].
    double max_decrease_rate(double lo, double hi) const;
    /// False only for a clamped shape whose kink lies strictly inside (lo, hi).
    bool is_c1_on(double lo, double hi) const;

    bool is_zero() const { return zero_; }
    const GammaParams& params() const { return p_; }
    double t1() const { return t1_; }
    /// Slope of the linear part.
    double slope() const { return slope_; }

private:
    enum class Shape { Constant, Affine, Clamp, SmoothClamp };

    GammaParams p_{};
    double t1_ = 0.0;
    double slope_ = 0.0;
    Shape shape_ = Shape::Constant;
    bool zero_ = true;
};

}  // namespace stlcbf

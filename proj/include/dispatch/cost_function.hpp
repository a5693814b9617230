#pragma once

#include <cmath>
#include <string>
#include <variant>

#include "dispatch/errors.hpp"

namespace dispatch {

/// Quadratic cost gain*(v - center)^2.  Also models the generation cost
/// kappa_g*(g - lbar)^2 with center = lbar.
struct Quadratic {
    double gain = 1.0;
    double center = 0.0;
};

/// kappa1*(v/capacity)^8 + kappa2*(v/capacity)^2, the soft capacity wall used
/// for the TCL classes.  kappa1 = 0 degrades gracefully to a scaled quadratic.
struct ScaledPolynomial {
    double kappa1 = 1.0;
    double kappa2 = 0.1;
    double capacity = 1.0;
};

/// Strongly convex scalar cost with exact derivatives and a monotone inverse
/// of the derivative.  Values are immutable; all queries are pure.
class CostFunction {
public:
    CostFunction() : impl_(Quadratic{}) {}
    CostFunction(Quadratic q) : impl_(q) {}
    CostFunction(ScaledPolynomial p) : impl_(p) {}

    static CostFunction quadratic(double gain, double center = 0.0) {
        return CostFunction(Quadratic{gain, center});
    }
    static CostFunction scaled_polynomial(double kappa1, double kappa2, double capacity) {
        return CostFunction(ScaledPolynomial{kappa1, kappa2, capacity});
    }

    double eval(double v) const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) {
            const double d = v - q->center;
            return q->gain * d * d;
        }
        const auto& p = std::get<ScaledPolynomial>(impl_);
        const double s = v / p.capacity;
        const double s2 = s * s;
        const double s8 = s2 * s2 * s2 * s2;
        return p.kappa1 * s8 + p.kappa2 * s2;
    }

    double d1(double v) const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) {
            return 2.0 * q->gain * (v - q->center);
        }
        const auto& p = std::get<ScaledPolynomial>(impl_);
        const double s = v / p.capacity;
        const double s2 = s * s;
        const double s6 = s2 * s2 * s2;
        return (8.0 * p.kappa1 * s6 * s + 2.0 * p.kappa2 * s) / p.capacity;
    }

    double d2(double v) const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) {
            (void)v;
            return 2.0 * q->gain;
        }
        const auto& p = std::get<ScaledPolynomial>(impl_);
        const double s = v / p.capacity;
        const double s2 = s * s;
        const double s6 = s2 * s2 * s2;
        return (56.0 * p.kappa1 * s6 + 2.0 * p.kappa2) / (p.capacity * p.capacity);
    }

    /// Inverse of d1: the unique v with d1(v) = m.  Closed form for the
    /// quadratic; safeguarded Newton with a bisection fallback for the
    /// polynomial (d1 is a strictly increasing odd degree-7 polynomial).
    /// `bound_scale` multiplies the capacity to form the bracketing window.
    double inv_d1(double m, double bound_scale = 10.0) const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) {
            if (q->gain <= 0.0)
                throw BracketFailure("inv_d1: quadratic cost with non-positive gain");
            return q->center + m / (2.0 * q->gain);
        }
        const auto& p = std::get<ScaledPolynomial>(impl_);
        if (p.kappa2 <= 0.0 && p.kappa1 <= 0.0)
            throw BracketFailure("inv_d1: degenerate polynomial cost");
        const double bound = bound_scale * p.capacity;
        double lo = -bound, hi = bound;
        if (d1(lo) > m || d1(hi) < m)
            throw BracketFailure("inv_d1: target slope outside the bracketing window");
        // Newton from a crude seed, clipped to the bracket when it misbehaves.
        double v = m / std::max(d2(0.0), 1e-300);
        v = std::min(std::max(v, lo), hi);
        for (int it = 0; it < 100; ++it) {
            const double f = d1(v) - m;
            if (f > 0.0) hi = v; else lo = v;
            const double df = d2(v);
            double step = (df > 0.0) ? f / df : 0.0;
            double vn = v - step;
            if (!(vn > lo && vn < hi)) vn = 0.5 * (lo + hi);
            if (std::abs(d1(vn) - m) <= 1e-12 * (1.0 + std::abs(m))) return vn;
            v = vn;
        }
        // Bisection polish for pathologically flat regions of the degree-7 slope.
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (d1(mid) < m) lo = mid; else hi = mid;
            if (std::abs(d1(mid) - m) <= 1e-12 * (1.0 + std::abs(m))) return mid;
        }
        return 0.5 * (lo + hi);
    }

    /// Lower bound on d2 used in strong-convexity assertions: 2*gain for the
    /// quadratic, 2*kappa2/capacity^2 for the polynomial.
    double convexity_mu() const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) return 2.0 * q->gain;
        const auto& p = std::get<ScaledPolynomial>(impl_);
        return 2.0 * p.kappa2 / (p.capacity * p.capacity);
    }

    bool is_quadratic() const { return std::holds_alternative<Quadratic>(impl_); }
    double center() const {
        if (const auto* q = std::get_if<Quadratic>(&impl_)) return q->center;
        return 0.0;
    }

    const Quadratic* as_quadratic() const { return std::get_if<Quadratic>(&impl_); }
    const ScaledPolynomial* as_polynomial() const { return std::get_if<ScaledPolynomial>(&impl_); }

private:
    std::variant<Quadratic, ScaledPolynomial> impl_;
};

}  // namespace dispatch

#pragma once

// Numerical building blocks shared by the fitting and prediction code:
// Gauss-Legendre rules, a derivative-free simplex minimizer, bracketed root
// finding and a few distribution helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "stvine/error.hpp"

namespace stvine {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Clip a probability into [eps, 1 - eps].
inline double clip_unit(double u, double eps = 1e-10) {
    return std::clamp(u, eps, 1.0 - eps);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre

/// n-point Gauss-Legendre rule mapped to [0, 1].
class GaussLegendre {
public:
    explicit GaussLegendre(std::size_t n) : nodes_(n), weights_(n) {
        if (n == 0) throw DomainError("Gauss-Legendre rule needs at least one node");
        const std::size_t m = (n + 1) / 2;
        for (std::size_t i = 0; i < m; ++i) {
            // Tricomi initial guess, then Newton on P_n.
            double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(n) + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (std::size_t k = 2; k <= n; ++k) {
                    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                if (n == 1) {
                    p1 = x;
                    p0 = 1.0;
                }
                dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes_[i] = 0.5 * (1.0 - x);
            nodes_[n - 1 - i] = 0.5 * (1.0 + x);
            weights_[i] = 0.5 * w;
            weights_[n - 1 - i] = 0.5 * w;
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    template <class F>
    double integrate(F&& f, double a, double b) const {
        double s = 0.0;
        const double w = b - a;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(a + w * nodes_[i]);
        return s * w;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Adaptive 61-point Gauss-Kronrod integration on [a, b].
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-13, unsigned max_depth = 18) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tol);
}

// ---------------------------------------------------------------------------
// Root finding

/// Bisection for an increasing function on [lo, hi]; returns x with f(x) ~ target.
template <class F>
double bisect_increasing(F&& f, double target, double lo, double hi, double xtol = 1e-12,
                         int max_iter = 200) {
    for (int i = 0; i < max_iter && hi - lo > xtol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Safeguarded Newton for an increasing function on [lo, hi] with derivative df.
/// Falls back to bisection whenever a Newton step leaves the bracket.
template <class F, class DF>
double newton_increasing(F&& f, DF&& df, double target, double lo, double hi, double x0,
                         double xtol = 1e-14, double ftol = 1e-14, int max_iter = 200) {
    double x = std::clamp(x0, lo, hi);
    double width_before = hi - lo;
    for (int i = 0; i < max_iter; ++i) {
        const double fx = f(x) - target;
        if (std::abs(fx) <= ftol) return x;
        if (fx < 0.0)
            lo = x;
        else
            hi = x;
        if (hi - lo <= xtol) return 0.5 * (lo + hi);
        const double d = df(x);
        double next = (d > 0.0 && std::isfinite(d)) ? x - fx / d : kNaN;
        // bisect when Newton leaves the bracket or stalls (bracket not halved in two steps)
        const bool stalled = (i % 2 == 1) && (hi - lo) > 0.5 * width_before;
        if (i % 2 == 1) width_before = hi - lo;
        if (stalled || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next <= lo || next >= hi) return 0.5 * (lo + hi);
        x = next;
    }
    throw NumericError("monotone inversion did not converge");
}

// ---------------------------------------------------------------------------
// Nelder-Mead

struct SimplexResult {
    std::vector<double> x;
    double value = kInf;
    int iterations = 0;
    bool converged = false;
    /// Best objective value after each iteration; non-increasing.
    std::vector<double> trace;
};

struct SimplexOptions {
    int max_iter = 2000;
    double ftol = 1e-10;
    double xtol = 1e-9;
    bool record_trace = false;
};

/// Derivative-free Nelder-Mead minimization. Non-finite objective values are
/// treated as +inf, so constraints can be expressed by returning inf.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x0, const std::vector<double>& step,
                                 const SimplexOptions& opt = {}) {
    const std::size_t n = x0.size();
    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isfinite(v) ? v : kInf;
    };
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

    SimplexResult res;
    std::vector<std::size_t> idx(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    for (int it = 0; it < opt.max_iter; ++it) {
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = idx[0], worst = idx[n], second = idx[n - 1];
        res.iterations = it;
        if (opt.record_trace) res.trace.push_back(vals[best]);

        double xspread = 0.0, xscale = 0.0;
        for (std::size_t k = 0; k < n; ++k) xscale = std::max(xscale, std::abs(pts[best][k]));
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                xspread = std::max(xspread, std::abs(pts[i][k] - pts[best][k]));
        if (std::isfinite(vals[worst]) &&
            std::abs(vals[worst] - vals[best]) <= opt.ftol * (1.0 + std::abs(vals[best])) &&
            xspread <= opt.xtol * (1.0 + xscale)) {
            res.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);

        for (std::size_t k = 0; k < n; ++k) xr[k] = centroid[k] + (centroid[k] - pts[worst][k]);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            for (std::size_t k = 0; k < n; ++k) xe[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        for (std::size_t k = 0; k < n; ++k)
            xc[k] = outside ? centroid[k] + 0.5 * (xr[k] - centroid[k])
                            : centroid[k] + 0.5 * (pts[worst][k] - centroid[k]);
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
            vals[i] = eval(pts[i]);
        }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    res.x = pts[static_cast<std::size_t>(it - vals.begin())];
    res.value = *it;
    if (opt.record_trace) res.trace.push_back(res.value);
    return res;
}

// ---------------------------------------------------------------------------
// Distribution helpers

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_quantile(double p) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double norm_log_pdf(double x) {
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Double-precision internals; the default promotion to long double is about
// five times slower with no accuracy gain that matters here.
using TPolicy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

inline double t_cdf(double x, double df) {
    return boost::math::cdf(boost::math::students_t_distribution<double, TPolicy>(df), x);
}

inline double t_quantile(double p, double df) {
    return boost::math::quantile(boost::math::students_t_distribution<double, TPolicy>(df), p);
}

inline double t_log_pdf(double x, double df) {
    return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi) -
           0.5 * (df + 1.0) * std::log1p(x * x / df);
}

}  // namespace stvine

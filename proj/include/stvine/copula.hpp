#pragma once

// Bivariate one-parameter copula families (plus the two-parameter Student t)
// with reflections, CDF, log-density, h-function, inverse h-function and the
// Kendall's tau <-> parameter maps.
//
// Conventions: C(u, v) is the copula CDF, h(u | v) = dC(u, v)/dv is the
// conditional CDF of the first argument given the second. Rotations follow
// the reflection convention
//   c_90(u, v)  = c(1 - u, v)
//   c_180(u, v) = c(1 - u, 1 - v)
//   c_270(u, v) = c(u, 1 - v)
// so 90 and 270 carry negative Kendall's tau.

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/owens_t.hpp>

#include "stvine/error.hpp"
#include "stvine/numeric.hpp"

namespace stvine {

enum class Family { Independence, Gaussian, StudentT, Clayton, Frank, Gumbel, Joe };

inline constexpr std::array<Family, 6> kAllFamilies = {Family::Gaussian, Family::StudentT, Family::Clayton,
                                                      Family::Frank,    Family::Gumbel,   Family::Joe};

/// Student t degrees of freedom profiled during family selection.
inline constexpr std::array<double, 9> kStudentDfGrid = {2.5, 3, 4, 5, 7, 10, 15, 20, 30};

/// Parameter caps used when mapping tau to a parameter.
inline constexpr double kMaxArchimedeanTheta = 50.0;
inline constexpr double kMaxAbsRho = 0.9999;

struct BivariateCopulaSpec {
    Family family = Family::Independence;
    int rotation = 0;    // 0, 90, 180 or 270
    double theta = 0.0;  // rho for the elliptical families
    double df = 0.0;     // Student t only

    friend bool operator==(const BivariateCopulaSpec&, const BivariateCopulaSpec&) = default;
};

inline BivariateCopulaSpec independence_copula() { return {}; }

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::Independence: return "Independence";
        case Family::Gaussian: return "Gaussian";
        case Family::StudentT: return "StudentT";
        case Family::Clayton: return "Clayton";
        case Family::Frank: return "Frank";
        case Family::Gumbel: return "Gumbel";
        case Family::Joe: return "Joe";
    }
    return "?";
}

/// One-letter code used in family tables (N, T, C, F, G, J, I).
inline char family_letter(Family f) {
    switch (f) {
        case Family::Independence: return 'I';
        case Family::Gaussian: return 'N';
        case Family::StudentT: return 'T';
        case Family::Clayton: return 'C';
        case Family::Frank: return 'F';
        case Family::Gumbel: return 'G';
        case Family::Joe: return 'J';
    }
    return '?';
}

inline Family parse_family(std::string_view s) {
    for (Family f : {Family::Independence, Family::Gaussian, Family::StudentT, Family::Clayton, Family::Frank,
                     Family::Gumbel, Family::Joe})
        if (s == family_name(f)) return f;
    if (s == "N" || s == "gaussian") return Family::Gaussian;
    if (s == "T" || s == "t" || s == "student") return Family::StudentT;
    if (s == "C" || s == "clayton") return Family::Clayton;
    if (s == "F" || s == "frank") return Family::Frank;
    if (s == "G" || s == "gumbel") return Family::Gumbel;
    if (s == "J" || s == "joe") return Family::Joe;
    if (s == "I" || s == "independence") return Family::Independence;
    throw DomainError("unknown copula family '" + std::string(s) + "'");
}

inline bool is_archimedean_lower_bounded(Family f) {
    return f == Family::Clayton || f == Family::Gumbel || f == Family::Joe;
}

inline bool supports_negative_tau(Family f) {
    return f == Family::Gaussian || f == Family::StudentT || f == Family::Frank;
}

/// Throws DomainError when the parameters are outside the family's admissible set.
inline void validate(const BivariateCopulaSpec& s) {
    if (s.rotation != 0 && s.rotation != 90 && s.rotation != 180 && s.rotation != 270)
        throw DomainError("rotation must be 0, 90, 180 or 270");
    const double t = s.theta;
    switch (s.family) {
        case Family::Independence: return;
        case Family::Gaussian:
            if (!(std::abs(t) < 1.0)) throw DomainError("Gaussian copula needs |rho| < 1");
            return;
        case Family::StudentT:
            if (!(std::abs(t) < 1.0)) throw DomainError("Student t copula needs |rho| < 1");
            if (!(s.df >= 2.1 && s.df <= 30.0)) throw DomainError("Student t copula needs df in [2.1, 30]");
            return;
        case Family::Clayton:
            if (!(t > 0.0 && std::isfinite(t))) throw DomainError("Clayton copula needs theta > 0");
            return;
        case Family::Frank:
            if (!(t != 0.0 && std::isfinite(t))) throw DomainError("Frank copula needs theta != 0");
            return;
        case Family::Gumbel:
            if (!(t >= 1.0 && std::isfinite(t))) throw DomainError("Gumbel copula needs theta >= 1");
            return;
        case Family::Joe:
            if (!(t >= 1.0 && std::isfinite(t))) throw DomainError("Joe copula needs theta >= 1");
            return;
    }
}

namespace detail {

inline constexpr double kTiny = 1e-300;

inline double clamp_open(double u) { return std::clamp(u, 1e-300, 1.0 - 1e-16); }

// Bivariate standard normal CDF via Owen's T function.
inline double owen_t_signed(double h, double num, double scale) {
    // T(h, num / (h * scale)) with the h == 0 limit handled explicitly.
    if (h == 0.0) {
        if (num == 0.0) return 0.0;
        return num > 0.0 ? 0.25 : -0.25;
    }
    return boost::math::owens_t(h, num / (h * scale));
}

inline double bvn_cdf(double h, double k, double rho) {
    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    if (h == 0.0 && k == 0.0) return 0.25 + std::asin(rho) / (2.0 * std::numbers::pi);
    double beta = 0.0;
    if (h * k < 0.0 || (h * k == 0.0 && h + k < 0.0)) beta = 0.5;
    const double val = 0.5 * norm_cdf(h) + 0.5 * norm_cdf(k) - owen_t_signed(h, k - rho * h, s) -
                       owen_t_signed(k, h - rho * k, s) - beta;
    return std::clamp(val, 0.0, 1.0);
}

// log(exp(a) + exp(b) - 1) for a, b >= 0
inline double log_sum_exp_minus_one(double a, double b) {
    const double m = std::max(a, b);
    if (m < 30.0) return std::log1p(std::expm1(a) + std::expm1(b));
    return m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
}

inline double student_scale(double y, double rho, double df) {
    return std::sqrt((df + y * y) * (1.0 - rho * rho) / (df + 1.0));
}

// ---- base (unrotated) families -------------------------------------------

struct BaseEval {
    double log_pdf;
    double h;  // h(u | v)
};

inline double gumbel_log_s(double lx, double ly, double th) {
    const double m = std::max(lx, ly), n = std::min(lx, ly);
    return th * m + std::log1p(std::exp(th * (n - m)));
}

// log S for Joe, S = a + b - ab with log a = la, log b = lb (both <= 0).
inline double joe_log_s(double la, double lb) {
    const double one_minus_a = -std::expm1(la), one_minus_b = -std::expm1(lb);
    const double prod = one_minus_a * one_minus_b;
    if (prod < 0.5) return std::log1p(-prod);
    // S = a + b (1 - a), small: combine in log space
    const double x = la, y = lb + std::log(one_minus_a);
    const double m = std::max(x, y);
    return m + std::log(std::exp(x - m) + std::exp(y - m));
}

inline BaseEval base_eval(Family f, double th, double df, double u, double v, bool want_pdf, bool want_h) {
    BaseEval r{0.0, u};
    switch (f) {
        case Family::Independence: return r;
        case Family::Gaussian: {
            const double x = norm_quantile(u), y = norm_quantile(v);
            const double s2 = (1.0 - th) * (1.0 + th);
            if (want_pdf) r.log_pdf = -0.5 * std::log(s2) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * s2);
            if (want_h) r.h = norm_cdf((x - th * y) / std::sqrt(s2));
            return r;
        }
        case Family::StudentT: {
            const double x = t_quantile(u, df), y = t_quantile(v, df);
            const double s2 = (1.0 - th) * (1.0 + th);
            if (want_pdf) {
                const double q = (x * x + y * y - 2.0 * th * x * y) / (df * s2);
                r.log_pdf = std::lgamma(0.5 * (df + 2.0)) + std::lgamma(0.5 * df) - 2.0 * std::lgamma(0.5 * (df + 1.0)) -
                            0.5 * std::log(s2) - 0.5 * (df + 2.0) * std::log1p(q) +
                            0.5 * (df + 1.0) * (std::log1p(x * x / df) + std::log1p(y * y / df));
            }
            if (want_h) r.h = t_cdf((x - th * y) / student_scale(y, th, df), df + 1.0);
            return r;
        }
        case Family::Clayton: {
            const double lu = std::log(u), lv = std::log(v);
            const double logA = log_sum_exp_minus_one(-th * lu, -th * lv);
            if (want_pdf) r.log_pdf = std::log1p(th) - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * logA;
            if (want_h) r.h = std::exp(-(th + 1.0) * lv - (1.0 + 1.0 / th) * logA);
            return r;
        }
        case Family::Frank: {
            const double e1 = std::expm1(-th), eu = std::expm1(-th * u), ev = std::expm1(-th * v);
            const double den = e1 + eu * ev;
            if (want_pdf) r.log_pdf = std::log(th * -e1) - th * (u + v) - 2.0 * std::log(std::abs(den));
            if (want_h) r.h = std::exp(-th * v) * eu / den;
            return r;
        }
        case Family::Gumbel: {
            const double x = -std::log(u), y = -std::log(v);
            const double lx = std::log(x), ly = std::log(y);
            const double logS = gumbel_log_s(lx, ly, th);
            const double A = std::exp(logS / th);
            if (want_pdf)
                r.log_pdf = -A + x + y + (th - 1.0) * (lx + ly) + (1.0 / th - 2.0) * logS + std::log(A + th - 1.0);
            if (want_h) r.h = std::exp(-A + y + (th - 1.0) * ly + (1.0 / th - 1.0) * logS);
            return r;
        }
        case Family::Joe: {
            const double lu = std::log1p(-u), lv = std::log1p(-v);
            const double one_minus_a = -std::expm1(th * lu);
            const double logS = joe_log_s(th * lu, th * lv);
            const double S = std::exp(logS);
            if (want_pdf) r.log_pdf = (1.0 / th - 2.0) * logS + (th - 1.0) * (lu + lv) + std::log(th - 1.0 + S);
            if (want_h) r.h = std::exp((1.0 / th - 1.0) * logS + (th - 1.0) * lv) * one_minus_a;
            return r;
        }
    }
    return r;
}

inline double base_cdf(Family f, double th, double df, double u, double v) {
    switch (f) {
        case Family::Independence: return u * v;
        case Family::Gaussian: return bvn_cdf(norm_quantile(u), norm_quantile(v), th);
        case Family::StudentT: {
            // C(u, v) = int_{-inf}^{y_v} f_df(y) h(u | y) dy. With y = sqrt(df) tan(a)
            // the t density becomes c cos(a)^(df - 1); a = -pi/2 + span w^2
            // smooths the endpoint.
            const double x = t_quantile(u, df), yv = t_quantile(v, df);
            const double s2 = (1.0 - th) * (1.0 + th);
            const double lc = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(std::numbers::pi);
            const double span = std::atan(yv / std::sqrt(df)) + 0.5 * std::numbers::pi;
            auto integrand = [&](double w) {
                if (w <= 0.0) return 0.0;
                const double a = -0.5 * std::numbers::pi + span * w * w;
                const double c = std::cos(a);
                if (c <= 0.0) return 0.0;
                const double y = std::sqrt(df) * std::tan(a);
                const double dens = std::exp(lc + (df - 1.0) * std::log(c));
                const double h = t_cdf((x - th * y) / std::sqrt((df + y * y) * s2 / (df + 1.0)), df + 1.0);
                return dens * h * span * 2.0 * w;
            };
            return std::clamp(integrate_adaptive(integrand, 0.0, 1.0, 1e-12, 10), 0.0, std::min(u, v));
        }
        case Family::Clayton: {
            const double logA = log_sum_exp_minus_one(-th * std::log(u), -th * std::log(v));
            return std::exp(-logA / th);
        }
        case Family::Frank: {
            const double e1 = std::expm1(-th), eu = std::expm1(-th * u), ev = std::expm1(-th * v);
            return -std::log1p(eu * ev / e1) / th;
        }
        case Family::Gumbel: {
            const double lx = std::log(-std::log(u)), ly = std::log(-std::log(v));
            return std::exp(-std::exp(gumbel_log_s(lx, ly, th) / th));
        }
        case Family::Joe: {
            const double logS = joe_log_s(th * std::log1p(-u), th * std::log1p(-v));
            return -std::expm1(logS / th);
        }
    }
    return u * v;
}

inline double base_hinv(Family f, double th, double df, double p, double v) {
    switch (f) {
        case Family::Independence: return p;
        case Family::Gaussian:
            return norm_cdf(norm_quantile(p) * std::sqrt((1.0 - th) * (1.0 + th)) + th * norm_quantile(v));
        case Family::StudentT: {
            const double y = t_quantile(v, df);
            return t_cdf(t_quantile(p, df + 1.0) * student_scale(y, th, df) + th * y, df);
        }
        case Family::Clayton: {
            // u = ((p v^{th+1})^{-th/(1+th)} + 1 - v^{-th})^{-1/th}
            const double lv = std::log(v);
            const double b = -th * lv;
            const double L = b - th / (1.0 + th) * std::log(p);
            const double t = std::expm1(L - b);
            const double lt = std::log(t);
            double log_inner;
            if (b + lt > 30.0)
                log_inner = b + lt + std::log1p(std::exp(-b - lt));
            else
                log_inner = std::log1p(std::exp(b) * t);
            return std::exp(-log_inner / th);
        }
        case Family::Frank: {
            const double e1 = std::expm1(-th);
            const double eu = p * e1 / (p + (1.0 - p) * std::exp(-th * v));
            return -std::log1p(eu) / th;
        }
        case Family::Gumbel:
        case Family::Joe: {
            auto h = [&](double u) { return base_eval(f, th, df, clamp_open(u), v, false, true).h; };
            auto d = [&](double u) { return std::exp(base_eval(f, th, df, clamp_open(u), v, true, false).log_pdf); };
            return newton_increasing(h, d, p, 0.0, 1.0, p, 1e-15, 1e-15, 400);
        }
    }
    return p;
}

// Reflection flags for a rotation.
inline bool flips_u(int rot) { return rot == 90 || rot == 180; }
inline bool flips_v(int rot) { return rot == 180 || rot == 270; }

}  // namespace detail

/// Log-density and h(u | v) evaluated together (shares quantile transforms).
struct PairEval {
    double log_pdf;
    double h;
};

inline PairEval copula_eval(const BivariateCopulaSpec& s, double u, double v, bool want_pdf = true,
                            bool want_h = true) {
    if (s.family == Family::Independence) return {0.0, u};
    u = detail::clamp_open(u);
    v = detail::clamp_open(v);
    const bool fu = detail::flips_u(s.rotation), fv = detail::flips_v(s.rotation);
    const double ub = fu ? 1.0 - u : u;
    const double vb = fv ? 1.0 - v : v;
    auto r = detail::base_eval(s.family, s.theta, s.df, detail::clamp_open(ub), detail::clamp_open(vb), want_pdf,
                               want_h);
    double h = std::clamp(r.h, 0.0, 1.0);
    if (fu) h = 1.0 - h;
    return {r.log_pdf, h};
}

inline double copula_log_pdf(const BivariateCopulaSpec& s, double u, double v) {
    validate(s);
    if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) throw DomainError("copula density needs u, v in (0, 1)");
    return copula_eval(s, u, v, true, false).log_pdf;
}

inline double copula_pdf(const BivariateCopulaSpec& s, double u, double v) {
    return std::exp(copula_log_pdf(s, u, v));
}

inline double copula_cdf(const BivariateCopulaSpec& s, double u, double v) {
    validate(s);
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) throw DomainError("copula CDF needs u, v in [0, 1]");
    if (u == 0.0 || v == 0.0) return 0.0;
    if (u == 1.0) return v;
    if (v == 1.0) return u;
    const auto base = [&](double a, double b) { return detail::base_cdf(s.family, s.theta, s.df, a, b); };
    switch (s.rotation) {
        case 90: return v - base(1.0 - u, v);
        case 180: return u + v - 1.0 + base(1.0 - u, 1.0 - v);
        case 270: return u - base(u, 1.0 - v);
        default: return base(u, v);
    }
}

/// Conditional CDF h(u | v) = dC(u, v)/dv.
inline double h_function(const BivariateCopulaSpec& s, double u, double v) {
    validate(s);
    if (!(v > 0.0 && v < 1.0)) throw DomainError("h-function needs v in (0, 1)");
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("h-function needs u in [0, 1]");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    return copula_eval(s, u, v, false, true).h;
}

/// Inverse of u -> h(u | v).
inline double h_inverse(const BivariateCopulaSpec& s, double p, double v) {
    validate(s);
    if (!(p > 0.0 && p < 1.0 && v > 0.0 && v < 1.0)) throw DomainError("h-inverse needs p, v in (0, 1)");
    if (s.family == Family::Independence) return p;
    const bool fu = detail::flips_u(s.rotation), fv = detail::flips_v(s.rotation);
    const double vb = detail::clamp_open(fv ? 1.0 - v : v);
    const double pb = fu ? 1.0 - p : p;
    const double ub = detail::base_hinv(s.family, s.theta, s.df, pb, vb);
    return std::clamp(fu ? 1.0 - ub : ub, 0.0, 1.0);
}

/// Reflect a spec by 90, 180 or 270 degrees. Reflections compose like the
/// Klein four-group: applying 180 twice, or 90 twice, restores the original.
inline BivariateCopulaSpec rotate(const BivariateCopulaSpec& s, int degrees) {
    if (degrees != 90 && degrees != 180 && degrees != 270 && degrees != 0)
        throw DomainError("rotation must be 90, 180 or 270");
    if (s.family == Family::Independence) return s;
    const bool fu = detail::flips_u(s.rotation) != detail::flips_u(degrees);
    const bool fv = detail::flips_v(s.rotation) != detail::flips_v(degrees);
    BivariateCopulaSpec r = s;
    r.rotation = fu ? (fv ? 180 : 90) : (fv ? 270 : 0);
    return r;
}

// ---------------------------------------------------------------------------
// Kendall's tau

namespace detail {

inline double frank_tau_positive(double th) {
    if (th < 1e-2) return th / 9.0 - th * th * th / 900.0;
    auto f = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
    const double debye1 = integrate_adaptive(f, 0.0, th, 1e-12, 10) / th;
    return 1.0 - 4.0 / th * (1.0 - debye1);
}

inline double joe_tau(double th) {
    if (th == 1.0) return 0.0;
    // tau = 1 + 4 int_0^1 phi/phi' dt with phi(t) = -log(1 - (1 - t)^th). After
    // x = (1 - t)^th this is 1 - 2/th + 4/th^2 int_0^1 g(x) x^(2/th - 2) dx with
    // g(x) = (1 - x) log(1 - x) + x, whose endpoint behaviour suits tanh-sinh.
    static boost::math::quadrature::tanh_sinh<double> ts;
    const double p = 2.0 / th - 2.0;
    auto f = [p](double x, double xc_signed) {
        if (x <= 0.0) return 0.0;
        const double xc = xc_signed > 0.0 ? xc_signed : 1.0 - x;
        if (x < 1e-3) return std::pow(x, p + 2.0) * (0.5 + x / 6.0 + x * x / 12.0 + x * x * x / 20.0);
        if (xc <= 0.0) return std::pow(x, p + 1.0);
        return (xc * std::log(xc) + x) * std::pow(x, p);
    };
    return 1.0 - 2.0 / th + 4.0 / (th * th) * ts.integrate(f, 0.0, 1.0, 1e-14);
}

// Table of (theta, tau) used to bracket numeric inversions.
struct TauTable {
    std::vector<double> theta, tau;
};

inline const TauTable& tau_table(Family f) {
    static std::once_flag once_frank, once_joe;
    static TauTable frank, joe;
    auto build = [](TauTable& t, double lo, double hi, auto fn) {
        const int n = 400;
        for (int i = 0; i <= n; ++i) {
            // denser near the lower end
            const double x = lo + (hi - lo) * std::pow(static_cast<double>(i) / n, 2.0);
            t.theta.push_back(x);
            t.tau.push_back(fn(x));
        }
    };
    if (f == Family::Frank) {
        std::call_once(once_frank, [&] { build(frank, 1e-6, kMaxArchimedeanTheta, frank_tau_positive); });
        return frank;
    }
    std::call_once(once_joe, [&] { build(joe, 1.0, kMaxArchimedeanTheta, joe_tau); });
    return joe;
}

// Invert an increasing tau(theta) using the table bracket and Illinois steps.
template <class F>
double invert_tau(const TauTable& t, double tau, F&& fn) {
    const auto it = std::lower_bound(t.tau.begin(), t.tau.end(), tau);
    if (it == t.tau.begin()) return t.theta.front();
    if (it == t.tau.end()) return t.theta.back();
    const std::size_t k = static_cast<std::size_t>(it - t.tau.begin());
    double a = t.theta[k - 1], b = t.theta[k];
    double fa = t.tau[k - 1] - tau, fb = t.tau[k] - tau;
    if (fb == 0.0) return b;
    int side = 0;
    for (int i = 0; i < 100; ++i) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const double fc = fn(c) - tau;
        if (std::abs(fc) < 1e-14 || std::abs(b - a) < 1e-13 * (1.0 + std::abs(c))) return c;
        if ((fc > 0.0) == (fb > 0.0)) {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
        }
    }
    return 0.5 * (a + b);
}

inline double base_tau(Family f, double th) {
    switch (f) {
        case Family::Independence: return 0.0;
        case Family::Gaussian:
        case Family::StudentT: return 2.0 / std::numbers::pi * std::asin(th);
        case Family::Clayton: return th / (th + 2.0);
        case Family::Gumbel: return 1.0 - 1.0 / th;
        case Family::Frank: return th > 0.0 ? frank_tau_positive(th) : -frank_tau_positive(-th);
        case Family::Joe: return joe_tau(th);
    }
    return 0.0;
}

}  // namespace detail

/// Kendall's tau implied by a spec (rotations 90/270 negate it).
inline double param_to_tau(const BivariateCopulaSpec& s) {
    validate(s);
    const double t = detail::base_tau(s.family, s.theta);
    return (s.rotation == 90 || s.rotation == 270) ? -t : t;
}

inline double param_to_tau(Family f, double theta, double df = 4.0) {
    return param_to_tau(BivariateCopulaSpec{f, 0, theta, f == Family::StudentT ? df : 0.0});
}

/// Unrotated parameter with the requested Kendall's tau. Throws RangeError when
/// tau cannot be reached by the unrotated family (the caller then rotates or
/// falls back to independence). Magnitudes beyond the parameter caps are
/// clamped to the cap.
inline double tau_to_param(Family f, double tau) {
    if (!(tau > -1.0 && tau < 1.0)) throw RangeError("Kendall's tau must lie in (-1, 1)");
    switch (f) {
        case Family::Independence:
            return 0.0;
        case Family::Gaussian:
        case Family::StudentT:
            return std::clamp(std::sin(std::numbers::pi * tau / 2.0), -kMaxAbsRho, kMaxAbsRho);
        case Family::Clayton:
            if (!(tau > 0.0)) throw RangeError("Clayton copula needs tau > 0");
            return std::min(2.0 * tau / (1.0 - tau), kMaxArchimedeanTheta);
        case Family::Gumbel:
            if (tau < 0.0) throw RangeError("Gumbel copula needs tau >= 0");
            return std::min(1.0 / (1.0 - tau), kMaxArchimedeanTheta);
        case Family::Frank: {
            const double a = std::abs(tau);
            const double th = detail::invert_tau(detail::tau_table(Family::Frank), a, detail::frank_tau_positive);
            return tau < 0.0 ? -th : th;
        }
        case Family::Joe:
            if (tau < 0.0) throw RangeError("Joe copula needs tau >= 0");
            return detail::invert_tau(detail::tau_table(Family::Joe), tau, detail::joe_tau);
    }
    return 0.0;
}

/// Spec of family `f` (rotation chosen from the sign of tau when needed)
/// matching Kendall's tau. Returns nullopt-like Independence when impossible.
inline BivariateCopulaSpec spec_from_tau(Family f, double tau, int positive_rotation = 0,
                                         int negative_rotation = 90, double df = 4.0) {
    BivariateCopulaSpec s{f, 0, 0.0, f == Family::StudentT ? df : 0.0};
    if (f == Family::Independence) return independence_copula();
    if (supports_negative_tau(f)) {
        if (f == Family::Frank && tau == 0.0) return independence_copula();
        s.theta = tau_to_param(f, tau);
        return s;
    }
    if (tau >= 0.0) {
        if (f == Family::Clayton && tau == 0.0) return independence_copula();
        s.theta = tau_to_param(f, tau);
        s.rotation = positive_rotation;
    } else {
        s.theta = tau_to_param(f, -tau);
        s.rotation = negative_rotation;
    }
    return s;
}

}  // namespace stvine

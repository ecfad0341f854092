#pragma once

// Gumbel and GEV marginals: CDF, quantile, density, maximum likelihood fit
// and the one-sample Kolmogorov-Smirnov test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stvine/error.hpp"
#include "stvine/numeric.hpp"

namespace stvine {

enum class MarginalFamily { Gumbel, GEV };

inline std::string_view marginal_family_name(MarginalFamily f) { return f == MarginalFamily::Gumbel ? "gumbel" : "gev"; }

inline MarginalFamily parse_marginal_family(std::string_view s) {
    if (s == "gumbel" || s == "Gumbel") return MarginalFamily::Gumbel;
    if (s == "gev" || s == "GEV") return MarginalFamily::GEV;
    throw DomainError("unknown marginal family '" + std::string(s) + "'");
}

struct MarginalSpec {
    MarginalFamily family = MarginalFamily::Gumbel;
    double a = 0.0;  // location
    double b = 1.0;  // scale
    double s = 0.0;  // shape, GEV only

    friend bool operator==(const MarginalSpec&, const MarginalSpec&) = default;
};

inline constexpr double kGevShapeLimit = 0.5;
inline constexpr double kGevGumbelSwitch = 1e-12;

namespace detail {

// log of t(x) = (1 + s z)^(-1/s), or -z in the Gumbel limit. NaN outside the support.
inline double gev_log_t(const MarginalSpec& m, double x) {
    const double z = (x - m.a) / m.b;
    if (m.family == MarginalFamily::Gumbel || std::abs(m.s) < kGevGumbelSwitch) return -z;
    const double sz = m.s * z;
    if (!(sz > -1.0)) return kNaN;
    return -std::log1p(sz) / m.s;
}

}  // namespace detail

inline void validate(const MarginalSpec& m) {
    if (!(m.b > 0.0) || !std::isfinite(m.a) || !std::isfinite(m.b) || !std::isfinite(m.s))
        throw DomainError("marginal scale must be positive and parameters finite");
}

inline double marginal_cdf(const MarginalSpec& m, double x) {
    if (std::isnan(x)) return kNaN;
    const double lt = detail::gev_log_t(m, x);
    if (std::isnan(lt)) return m.s > 0.0 ? 0.0 : 1.0;  // below / above the support
    return std::exp(-std::exp(lt));
}

inline double marginal_log_pdf(const MarginalSpec& m, double x) {
    const double lt = detail::gev_log_t(m, x);
    if (std::isnan(lt)) return -kInf;
    const double s = m.family == MarginalFamily::Gumbel ? 0.0 : m.s;
    return -std::log(m.b) + (s + 1.0) * lt - std::exp(lt);
}

inline double marginal_quantile(const MarginalSpec& m, double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("marginal_quantile needs p in (0, 1)");
    const double w = std::log(-std::log(p));  // log(-log p)
    if (m.family == MarginalFamily::Gumbel || std::abs(m.s) < kGevGumbelSwitch) return m.a - m.b * w;
    return m.a + m.b * std::expm1(-m.s * w) / m.s;
}

/// Mean of the distribution (infinite for GEV shape >= 1).
inline double marginal_mean(const MarginalSpec& m) {
    constexpr double euler = 0.57721566490153286;
    if (m.family == MarginalFamily::Gumbel || std::abs(m.s) < kGevGumbelSwitch) return m.a + m.b * euler;
    if (m.s >= 1.0) return kInf;
    return m.a + m.b * (std::tgamma(1.0 - m.s) - 1.0) / m.s;
}

inline double marginal_log_likelihood(const MarginalSpec& m, std::span<const double> xs) {
    double ll = 0.0;
    for (double x : xs) {
        const double l = marginal_log_pdf(m, x);
        if (!std::isfinite(l)) return -kInf;
        ll += l;
    }
    return ll;
}

/// Method-of-moments Gumbel start (shape 0 for GEV).
inline MarginalSpec moment_start(std::span<const double> xs, MarginalFamily family) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    const double b = std::sqrt(var) * std::sqrt(6.0) / std::numbers::pi;
    return {family, mean - 0.57721566490153286 * b, b, 0.0};
}

struct MarginalFit {
    MarginalSpec spec;
    double log_lik = 0.0;
    double start_log_lik = 0.0;
    /// Best log-likelihood after each optimizer iteration.
    std::vector<double> trace;
};

inline MarginalFit fit_marginal_detailed(std::span<const double> xs, MarginalFamily family) {
    if (xs.size() < 20) throw InsufficientDataError("fit_marginal needs at least 20 samples");
    for (double x : xs)
        if (!std::isfinite(x)) throw DomainError("fit_marginal: samples must be finite");
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi))) throw FitError("fit_marginal: samples have zero variance");

    const MarginalSpec start = moment_start(xs, family);
    const bool gev = family == MarginalFamily::GEV;
    auto unpack = [&](const std::vector<double>& p) {
        return MarginalSpec{family, p[0], std::exp(p[1]), gev ? p[2] : 0.0};
    };
    auto nll = [&](const std::vector<double>& p) {
        if (gev && !(std::abs(p[2]) < kGevShapeLimit)) return kInf;
        return -marginal_log_likelihood(unpack(p), xs);
    };

    SimplexOptions opt;
    opt.record_trace = true;
    opt.max_iter = 5000;
    opt.ftol = 1e-12;
    opt.xtol = 1e-10;

    auto run = [&](const MarginalSpec& s0) {
        std::vector<double> x0{s0.a, std::log(s0.b)}, step{0.1 * s0.b, 0.1};
        if (gev) {
            x0.push_back(s0.s);
            step.push_back(0.05);
        }
        auto r = nelder_mead(nll, x0, step, opt);
        // restart once from the optimum to escape early simplex collapse
        auto r2 = nelder_mead(nll, r.x, step, opt);
        for (double v : r2.trace) r.trace.push_back(std::min(v, r.value));
        if (r2.value <= r.value) {
            r.x = r2.x;
            r.value = r2.value;
        }
        return r;
    };

    MarginalFit out;
    out.start_log_lik = marginal_log_likelihood(start, xs);
    auto res = run(start);
    if (!std::isfinite(res.value) && gev) {
        // constrained retry from the Gumbel optimum
        const auto g = fit_marginal_detailed(xs, MarginalFamily::Gumbel);
        res = run(MarginalSpec{family, g.spec.a, g.spec.b, 0.0});
    }
    if (!std::isfinite(res.value)) throw FitError("fit_marginal: no parameter keeps every sample inside the support");
    out.spec = unpack(res.x);
    out.log_lik = -res.value;
    out.trace.reserve(res.trace.size());
    for (double v : res.trace) out.trace.push_back(-v);
    return out;
}

inline MarginalSpec fit_marginal(std::span<const double> xs, MarginalFamily family) {
    return fit_marginal_detailed(xs, family).spec;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

/// Asymptotic Kolmogorov survival function P(K > lambda).
inline double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.18) {
        // P(K <= l) = sqrt(2 pi)/l sum exp(-(2k-1)^2 pi^2 / (8 l^2))
        const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double s = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double j = 2.0 * k - 1.0;
            s += std::exp(c * j * j);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

inline KsResult ks_test(std::span<const double> xs, const std::function<double(double)>& cdf) {
    if (xs.size() < 5) throw InsufficientDataError("ks_test needs at least 5 samples");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return {d, kolmogorov_sf(std::sqrt(n) * d)};
}

inline KsResult ks_test(std::span<const double> xs, const MarginalSpec& m) {
    return ks_test(xs, [&](double x) { return marginal_cdf(m, x); });
}

inline KsResult ks_test_uniform(std::span<const double> us) {
    return ks_test(us, [](double u) { return std::clamp(u, 0.0, 1.0); });
}

}  // namespace stvine

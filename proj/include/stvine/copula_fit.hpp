#pragma once

// Family selection for a pair copula: parameters come from Kendall's tau,
// families are compared by summed log-density.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "stvine/copula.hpp"
#include "stvine/kendall.hpp"
#include "stvine/random.hpp"

namespace stvine {

inline constexpr double kMaxAbsFitTau = 0.99;

inline std::vector<Family> default_candidates() { return {kAllFamilies.begin(), kAllFamilies.end()}; }

struct FitFamilyOptions {
    std::vector<Family> candidates = default_candidates();
    std::optional<double> tau_hint;
    /// Also try the 180-degree (survival) versions of Clayton, Gumbel and Joe
    /// when tau is positive. Off by default: rotations are only used to reach
    /// negative tau.
    bool survival_rotations = false;
    /// Pairs used for the likelihood comparison; 0 means all of them.
    std::size_t max_pairs = 0;
    /// Pairs used to pick among a family's shape variants before the full comparison.
    std::size_t prescreen_pairs = 500;
    std::uint64_t seed = 0;
    std::size_t min_pairs = 30;
};

struct FamilyFit {
    BivariateCopulaSpec spec;
    double log_lik = 0.0;
    double tau = 0.0;
    /// Set when no candidate could represent the data and Independence was returned.
    bool fallback = false;
};

namespace detail {

// All concrete specs a family contributes for a given tau.
inline std::vector<BivariateCopulaSpec> candidate_specs(Family f, double tau, bool survival) {
    std::vector<BivariateCopulaSpec> out;
    if (!std::isfinite(tau)) return out;
    tau = std::clamp(tau, -kMaxAbsFitTau, kMaxAbsFitTau);
    switch (f) {
        case Family::Independence:
            out.push_back(independence_copula());
            break;
        case Family::Gaussian:
            out.push_back({f, 0, tau_to_param(f, tau), 0.0});
            break;
        case Family::StudentT: {
            const double rho = tau_to_param(f, tau);
            for (double df : kStudentDfGrid) out.push_back({f, 0, rho, df});
            break;
        }
        case Family::Frank:
            if (tau != 0.0) out.push_back({f, 0, tau_to_param(f, tau), 0.0});
            break;
        case Family::Clayton:
        case Family::Gumbel:
        case Family::Joe: {
            if (tau == 0.0 && f == Family::Clayton) break;
            const double th = tau_to_param(f, std::abs(tau));
            if (tau >= 0.0) {
                out.push_back({f, 0, th, 0.0});
                if (survival) out.push_back({f, 180, th, 0.0});
            } else {
                out.push_back({f, 90, th, 0.0});
                out.push_back({f, 270, th, 0.0});
            }
            break;
        }
    }
    return out;
}

inline std::vector<std::size_t> subsample(std::size_t n, std::size_t max_pairs, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (max_pairs == 0 || n <= max_pairs) return idx;
    Rng rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < max_pairs; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(max_pairs);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline double sum_log_pdf(const BivariateCopulaSpec& s, std::span<const double> u, std::span<const double> v,
                          std::span<const std::size_t> idx) {
    if (s.family == Family::Independence) return 0.0;
    double ll = 0.0;
    for (std::size_t i : idx) {
        const double l = copula_eval(s, u[i], v[i], true, false).log_pdf;
        if (!std::isfinite(l)) return -kInf;
        ll += l;
    }
    return ll;
}

/// Among several shape variants of one family (t degrees of freedom,
/// rotations), keep the best on a thinned subset of at most `keep` pairs, so
/// that only one variant per family is scored on the full sample.
template <class Score>
std::vector<BivariateCopulaSpec> prescreen(std::vector<BivariateCopulaSpec> specs, std::span<const std::size_t> idx,
                                           std::size_t keep, Score&& score) {
    if (specs.size() < 2 || idx.size() <= 2 * keep) return specs;
    std::vector<std::size_t> thin;
    const std::size_t step = idx.size() / keep;
    for (std::size_t i = 0; i < idx.size(); i += step) thin.push_back(idx[i]);
    std::size_t best = 0;
    double best_ll = -kInf;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const double ll = score(specs[k], thin);
        if (ll > best_ll) {
            best_ll = ll;
            best = k;
        }
    }
    return {specs[best]};
}

inline void check_pairs(std::span<const double> u, std::span<const double> v, std::size_t min_pairs) {
    if (u.size() != v.size()) throw ShapeError("fit_family: u and v differ in length");
    if (u.size() < min_pairs)
        throw InsufficientDataError("fit_family needs at least " + std::to_string(min_pairs) + " pairs, got " +
                                    std::to_string(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i)
        if (!(u[i] > 0.0 && u[i] < 1.0 && v[i] > 0.0 && v[i] < 1.0))
            throw DomainError("fit_family: pseudo-observations must lie in (0, 1)");
}

}  // namespace detail

/// The spec with the family, rotation and df of `proto` whose parameter gives
/// Kendall's tau `tau` (clipped to the fitting range). Independence when the
/// rotation cannot reach the sign of tau.
inline BivariateCopulaSpec with_tau(const BivariateCopulaSpec& proto, double tau) {
    if (proto.family == Family::Independence || !std::isfinite(tau)) return independence_copula();
    tau = std::clamp(tau, -kMaxAbsFitTau, kMaxAbsFitTau);
    BivariateCopulaSpec s = proto;
    if (supports_negative_tau(s.family)) {
        if (s.family == Family::Frank && tau == 0.0) return independence_copula();
        s.theta = tau_to_param(s.family, tau);
        return s;
    }
    const double signed_tau = (s.rotation == 90 || s.rotation == 270) ? -tau : tau;
    if (signed_tau < 0.0 || (s.family == Family::Clayton && signed_tau == 0.0)) return independence_copula();
    s.theta = tau_to_param(s.family, signed_tau);
    return s;
}

/// Select the family with the largest log-likelihood; each candidate's
/// parameter is fixed by the empirical Kendall's tau of the pairs (or by the
/// hint when one is supplied).
inline FamilyFit fit_family(std::span<const double> u, std::span<const double> v, const FitFamilyOptions& opt = {}) {
    detail::check_pairs(u, v, opt.min_pairs);
    const double tau = opt.tau_hint ? *opt.tau_hint : kendall_tau(u, v);
    const auto idx = detail::subsample(u.size(), opt.max_pairs, opt.seed);

    FamilyFit best;
    best.tau = tau;
    best.log_lik = -kInf;
    bool any = false;
    auto score = [&](const BivariateCopulaSpec& s, std::span<const std::size_t> sub) {
        return detail::sum_log_pdf(s, u, v, sub);
    };
    for (Family f : opt.candidates) {
        for (const auto& s : detail::prescreen(detail::candidate_specs(f, tau, opt.survival_rotations), idx,
                                               opt.prescreen_pairs, score)) {
            const double ll = detail::sum_log_pdf(s, u, v, idx);
            if (!std::isfinite(ll)) continue;
            if (!any || ll > best.log_lik) {
                best.spec = s;
                best.log_lik = ll;
                any = true;
            }
        }
    }
    if (!any) {
        best.spec = independence_copula();
        best.log_lik = 0.0;
        best.fallback = true;
    }
    return best;
}

/// Family selection where each pair carries its own target tau (for example
/// from a tau-distance polynomial). The selected spec's parameter is the one
/// implied by the mean tau; `log_lik` uses the per-pair parameters.
inline FamilyFit fit_family_varying(std::span<const double> u, std::span<const double> v,
                                    std::span<const double> pair_tau, const FitFamilyOptions& opt = {}) {
    detail::check_pairs(u, v, opt.min_pairs);
    if (pair_tau.size() != u.size()) throw ShapeError("fit_family_varying: one tau per pair required");
    const auto idx = detail::subsample(u.size(), opt.max_pairs, opt.seed);

    // distinct tau values, each evaluated once per candidate
    std::map<double, std::vector<std::size_t>> groups;
    double mean_tau = 0.0;
    for (std::size_t i : idx) {
        groups[pair_tau[i]].push_back(i);
        mean_tau += pair_tau[i];
    }
    mean_tau /= static_cast<double>(idx.size());

    auto score = [&](const BivariateCopulaSpec& p, std::span<const std::size_t> sub) {
        double ll = 0.0;
        for (std::size_t i : sub) ll += copula_eval(with_tau(p, pair_tau[i]), u[i], v[i], true, false).log_pdf;
        return std::isfinite(ll) ? ll : -kInf;
    };
    struct Acc {
        BivariateCopulaSpec proto;
        double ll = 0.0;
        bool ok = true;
    };
    FamilyFit best;
    best.tau = mean_tau;
    best.log_lik = -kInf;
    bool any = false;
    for (Family f : opt.candidates) {
        // the candidate shapes (rotation, df) are those available at the mean tau
        std::vector<Acc> accs;
        for (const auto& p : detail::prescreen(detail::candidate_specs(f, mean_tau, opt.survival_rotations), idx,
                                               opt.prescreen_pairs, score))
            accs.push_back({p});
        for (const auto& [t, members] : groups)
            for (auto& a : accs) {
                if (!a.ok) continue;
                const double ll = detail::sum_log_pdf(with_tau(a.proto, t), u, v, members);
                if (!std::isfinite(ll))
                    a.ok = false;
                else
                    a.ll += ll;
            }
        for (const auto& a : accs) {
            if (!a.ok) continue;
            if (!any || a.ll > best.log_lik) {
                best.spec = a.proto;
                best.log_lik = a.ll;
                any = true;
            }
        }
    }
    if (!any) {
        best.spec = independence_copula();
        best.log_lik = 0.0;
        best.fallback = true;
    }
    return best;
}

}  // namespace stvine

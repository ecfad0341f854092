#pragma once

// Covariate-augmented C-vine around a center value u0. Tree 1 links u0 to
// every neighbor through a bin-mixture spatio-temporal copula; trees 2 and up
// are ordinary pair copulas on the conditioned neighbor values, with the
// neighbors in NeighborSet order as the successive roots.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "stvine/copula_fit.hpp"
#include "stvine/numeric.hpp"
#include "stvine/spatial.hpp"

namespace stvine {

struct VineConfig {
    NeighborConfig neighbors;
    std::size_t n_bins = 10;
    int degree = 3;
    std::vector<Family> tree1_candidates = default_candidates();
    std::vector<Family> upper_candidates = default_candidates();
    std::size_t min_pairs = 30;
    /// Pairs used when comparing tree-1 candidate families within one cell.
    std::size_t max_pairs = 5000;
    std::size_t max_per_cell = 20000;
    std::uint64_t seed = 0;
};

struct VineModel {
    NeighborConfig neighbors;
    StCopula dependent;
    std::vector<StCopula> covariate;  // one per entry of neighbors.covariates
    /// Upper-tree specs, k = 0..d'-2 then j = k+1..d'-1, for the pair (z_j, z_k).
    std::vector<BivariateCopulaSpec> upper;
    std::vector<std::string> warnings;

    std::size_t dimension() const { return neighbors.dimension(); }

    const StCopula& group_copula(NeighborGroup g) const {
        switch (g) {
            case NeighborGroup::CovariateV: return covariate.at(0);
            case NeighborGroup::CovariateW: return covariate.at(1);
            default: return dependent;
        }
    }

    std::size_t upper_index(std::size_t k, std::size_t j) const {
        const std::size_t d = dimension();
        // edges before tree level k: sum_{i<k} (d - 1 - i)
        return k * (d - 1) - k * (k - 1) / 2 + (j - k - 1);
    }
};

inline constexpr double kVineClip = 1e-10;

/// Tree-1 mixtures of a neighbor set, fixed by the neighbor distances and lags.
struct ResolvedNeighbors {
    std::vector<PairMixture> tree1;
    std::vector<double> u;
};

/// Tree-1 mixtures keyed by (group, distance, lag); distances repeat across
/// time steps, and resolving a mixture may invert tau numerically.
class MixtureCache {
public:
    explicit MixtureCache(const VineModel& m) : m_(&m) {}

    const PairMixture& get(const Neighbor& nb) {
        const auto key = std::make_tuple(static_cast<int>(nb.group), nb.dist, nb.lag);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, m_->group_copula(nb.group).at(nb.dist, nb.lag)).first;
        return it->second;
    }

private:
    const VineModel* m_;
    std::map<std::tuple<int, double, int>, PairMixture> cache_;
};

inline ResolvedNeighbors resolve(const VineModel& m, const NeighborSet& ns, MixtureCache* cache = nullptr) {
    if (ns.size() != m.dimension())
        throw ShapeError("neighbor set of size " + std::to_string(ns.size()) + " does not match a vine of dimension " +
                         std::to_string(m.dimension()));
    ResolvedNeighbors r;
    for (const auto& nb : ns.items) {
        r.tree1.push_back(cache ? cache->get(nb) : m.group_copula(nb.group).at(nb.dist, nb.lag));
        r.u.push_back(nb.u);
    }
    return r;
}

/// Log of the joint vine density of (neighbors, u0). -inf flags a density
/// that under- or overflowed.
inline double vine_log_density(const VineModel& m, double u0, const ResolvedNeighbors& rn,
                               std::vector<double>* scratch = nullptr) {
    const std::size_t d = rn.u.size();
    std::vector<double> local;
    std::vector<double>& z = scratch ? *scratch : local;
    z.resize(d);
    double ll = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const PairMixture& mx = rn.tree1[i];
        if (mx.is_independence()) {
            z[i] = rn.u[i];
            continue;
        }
        ll += mx.log_pdf(rn.u[i], u0);
        z[i] = clip_unit(mx.h(rn.u[i], u0), kVineClip);
    }
    for (std::size_t k = 0; k + 1 < d; ++k)
        for (std::size_t j = k + 1; j < d; ++j) {
            const BivariateCopulaSpec& s = m.upper[m.upper_index(k, j)];
            if (s.family == Family::Independence) continue;
            const auto e = copula_eval(s, z[j], z[k], true, true);
            ll += e.log_pdf;
            z[j] = clip_unit(e.h, kVineClip);
        }
    return std::isfinite(ll) ? ll : -kInf;
}

inline double vine_log_density(const VineModel& m, double u0, const NeighborSet& ns) {
    return vine_log_density(m, u0, resolve(m, ns));
}

// ---------------------------------------------------------------------------
// Conditional distribution of u0 given the neighbors

struct QuadratureOptions {
    /// Total nodes: panels x order.
    std::size_t panels = 8;
    std::size_t order = 8;
    double clip = 1e-6;
};

/// The conditional density of u0 given its neighbors, tabulated in the normal
/// score z = Phi^-1(u0) on composite Gauss-Legendre panels over
/// [Phi^-1(clip), Phi^-1(1 - clip)].
class ConditionalDistribution {
public:
    ConditionalDistribution(const VineModel& m, const ResolvedNeighbors& rn, const QuadratureOptions& q = {})
        : model_(&m), rn_(rn), gl_(q.order), panels_(q.panels) {
        if (q.panels == 0 || q.order == 0) throw DomainError("quadrature needs at least one panel and node");
        zlo_ = norm_quantile(q.clip);
        zhi_ = -zlo_;
        width_ = (zhi_ - zlo_) / static_cast<double>(panels_);
        const std::size_t n = panels_ * gl_.size();
        z_.resize(n);
        w_.resize(n);
        std::vector<double> lg(n);
        std::vector<double> scratch;
        double mx = -kInf;
        for (std::size_t p = 0; p < panels_; ++p)
            for (std::size_t i = 0; i < gl_.size(); ++i) {
                const std::size_t k = p * gl_.size() + i;
                z_[k] = zlo_ + width_ * (static_cast<double>(p) + gl_.nodes()[i]);
                w_[k] = width_ * gl_.weights()[i];
                const double u = norm_cdf(z_[k]);
                lg[k] = vine_log_density(m, u, rn_, &scratch) + norm_log_pdf(z_[k]);
                mx = std::max(mx, lg[k]);
            }
        if (!std::isfinite(mx)) throw DegenerateDensityError("conditional density vanishes on every node");
        g_.resize(n);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            g_[k] = std::exp(lg[k] - mx);
            s += w_[k] * g_[k];
        }
        log_norm_ = mx + std::log(s);
        if (!(s > 0.0) || log_norm_ < std::log(1e-12))
            throw DegenerateDensityError("conditional density integrates to less than 1e-12");
        for (double& v : g_) v /= s;
        cum_.assign(panels_ + 1, 0.0);
        for (std::size_t p = 0; p < panels_; ++p) {
            double a = 0.0;
            for (std::size_t i = 0; i < gl_.size(); ++i) a += w_[p * gl_.size() + i] * g_[p * gl_.size() + i];
            cum_[p + 1] = cum_[p] + a;
        }
    }

    /// Normalized density of u0 at u.
    double density(double u) const {
        if (!(u > 0.0 && u < 1.0)) throw DomainError("conditional density needs u in (0, 1)");
        return std::exp(vine_log_density(*model_, u, rn_) - log_norm_);
    }

    double log_normalizer() const { return log_norm_; }

    /// E[g(u0)] by the tabulated rule.
    template <class F>
    double expectation(F&& g) const {
        double s = 0.0;
        for (std::size_t k = 0; k < z_.size(); ++k) s += w_[k] * g_[k] * g(norm_cdf(z_[k]));
        return s;
    }

    /// Conditional CDF at u (0 below the clipped range, 1 above it).
    double cdf(double u) const {
        if (u <= 0.0) return 0.0;
        if (u >= 1.0) return 1.0;
        return cdf_z(norm_quantile(u));
    }

    /// Conditional quantile by bisection on the normal score.
    double quantile(double p, double tol = 1e-8) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
        std::size_t panel = 0;
        while (panel + 1 < panels_ && cum_[panel + 1] < p) ++panel;
        double lo = zlo_ + width_ * static_cast<double>(panel), hi = lo + width_;
        // tolerance on u maps to at least this much in z over the clipped range
        const double ztol = tol / 0.4;
        while (hi - lo > ztol) {
            const double mid = 0.5 * (lo + hi);
            if (cdf_in_panel(panel, mid) < p)
                lo = mid;
            else
                hi = mid;
        }
        return norm_cdf(0.5 * (lo + hi));
    }

private:
    // Lagrange interpolant of the panel's tabulated density at z.
    double interp(std::size_t panel, double z) const {
        const std::size_t m = gl_.size(), off = panel * m;
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double l = 1.0;
            for (std::size_t j = 0; j < m; ++j)
                if (j != i) l *= (z - z_[off + j]) / (z_[off + i] - z_[off + j]);
            s += l * g_[off + i];
        }
        return s;
    }

    double cdf_in_panel(std::size_t panel, double z) const {
        const double a = zlo_ + width_ * static_cast<double>(panel);
        double s = 0.0;
        const double len = z - a;
        if (len > 0.0)
            for (std::size_t i = 0; i < gl_.size(); ++i)
                s += len * gl_.weights()[i] * std::max(0.0, interp(panel, a + len * gl_.nodes()[i]));
        return std::clamp(cum_[panel] + s, 0.0, 1.0);
    }

    double cdf_z(double z) const {
        if (z <= zlo_) return 0.0;
        if (z >= zhi_) return 1.0;
        const std::size_t panel = std::min(panels_ - 1, static_cast<std::size_t>((z - zlo_) / width_));
        return cdf_in_panel(panel, z);
    }

    const VineModel* model_;
    ResolvedNeighbors rn_;
    GaussLegendre gl_;
    std::size_t panels_;
    double zlo_ = 0.0, zhi_ = 0.0, width_ = 0.0, log_norm_ = 0.0;
    std::vector<double> z_, w_, g_, cum_;
};

inline double conditional_density(const VineModel& m, double u0, const NeighborSet& ns, const QuadratureOptions& q = {}) {
    return ConditionalDistribution(m, resolve(m, ns), q).density(u0);
}

// ---------------------------------------------------------------------------
// Fitting

/// Training design: one row of neighbor values per center, plus u0.
struct VineTrainingSet {
    std::vector<NeighborSet> neighborhoods;
    std::vector<double> u0;
};

inline VineTrainingSet training_set(const UniformPanel& up, const DistanceMatrix& dm,
                                    const std::vector<std::size_t>& stations, const NeighborConfig& cfg) {
    VineTrainingSet ts;
    for (std::size_t s : stations)
        for (std::size_t t = cfg.first_time(); t < up.n_times(); ++t) {
            const double u0 = up(0, s, t);
            if (std::isnan(u0)) continue;
            ts.neighborhoods.push_back(build_neighborhood(up, dm, s, t, stations, cfg));
            ts.u0.push_back(u0);
        }
    return ts;
}

namespace detail {

// Tau polynomial, lowering the degree when too few bins are usable.
inline TauPolynomial fit_polynomial_with_fallback(const Correlogram& cg, int degree, std::vector<std::string>& warn,
                                                  const std::string& what) {
    for (int d = degree; d >= 0; --d) {
        try {
            auto tp = fit_tau_polynomial(cg, d);
            if (d != degree)
                warn.push_back(what + ": tau polynomial degree lowered from " + std::to_string(degree) + " to " +
                               std::to_string(d));
            return tp;
        } catch (const FitError&) {
        }
    }
    warn.push_back(what + ": no usable correlogram bins, tree-1 copulas set to independence");
    TauPolynomial tp;
    tp.degree = 0;
    tp.h_max = cg.bins.edges.back();
    for (std::size_t lag = 0; lag < kNumLags; ++lag) {
        tp.coef[lag] = {0.0};
        tp.residuals[lag].assign(cg.bins.n_bins(), kNaN);
    }
    return tp;
}

}  // namespace detail

struct FittedStructure {
    Correlogram correlogram;
    StCopula copula;
};

/// Correlogram, polynomial and per-bin families for one pair source.
inline FittedStructure fit_first_tree_group(const UniformPanel& up, const DistanceMatrix& dm,
                                            const std::vector<std::size_t>& stations, const BinPartition& bins,
                                            const PairSource& src, const VineConfig& cfg,
                                            std::vector<std::string>& warnings, const std::string& name) {
    PairSampleOptions po;
    po.max_per_cell = cfg.max_per_cell;
    po.seed = cfg.seed + 7919 * (src.neighbor_var + 1);
    const PairSample ps = collect_pairs(up, dm, stations, bins, src, po);
    FittedStructure out;
    out.correlogram = correlogram_from(ps, cfg.min_pairs);
    const TauPolynomial tp = detail::fit_polynomial_with_fallback(out.correlogram, cfg.degree, warnings, name);
    StCopulaFitOptions so;
    so.candidates = cfg.tree1_candidates;
    so.min_pairs = cfg.min_pairs;
    so.max_pairs = cfg.max_pairs;
    so.seed = po.seed;
    out.copula = fit_st_copula(ps, tp, so);
    return out;
}

/// Sequential fit of trees 2 and up. z[i] holds h(u_i | u0) for every
/// training record; it is overwritten level by level with the conditioned
/// values. Returns the specs in VineModel::upper order.
inline std::vector<BivariateCopulaSpec> fit_upper_trees(std::vector<std::vector<double>>& z, const VineConfig& cfg,
                                                        std::vector<std::string>& warnings) {
    const std::size_t d = z.size();
    const std::size_t n = d ? z[0].size() : 0;
    std::vector<BivariateCopulaSpec> upper;
    FitFamilyOptions fo;
    fo.candidates = cfg.upper_candidates;
    fo.min_pairs = cfg.min_pairs;
    for (std::size_t k = 0; k + 1 < d; ++k)
        for (std::size_t j = k + 1; j < d; ++j) {
            BivariateCopulaSpec s = independence_copula();
            if (n < cfg.min_pairs) {
                warnings.push_back("upper edge (" + std::to_string(k + 1) + "," + std::to_string(j + 1) + "): only " +
                                   std::to_string(n) + " records, using independence");
            } else {
                const FamilyFit ff = fit_family(z[j], z[k], fo);
                if (ff.fallback)
                    warnings.push_back("upper edge (" + std::to_string(k + 1) + "," + std::to_string(j + 1) +
                                       "): no candidate fits, using independence");
                s = ff.spec;
            }
            upper.push_back(s);
            if (s.family != Family::Independence)
                for (std::size_t r = 0; r < n; ++r) z[j][r] = clip_unit(copula_eval(s, z[j][r], z[k][r], false, true).h, kVineClip);
        }
    return upper;
}

struct VineFit {
    VineModel model;
    Correlogram dependent_correlogram;
    std::vector<Correlogram> covariate_correlograms;
    VineTrainingSet training;
    double log_lik = 0.0;
};

/// Fit the full vine on the panel restricted to `stations`.
inline VineFit fit_vine(const UniformPanel& up, const DistanceMatrix& dm, const std::vector<std::size_t>& stations,
                        const VineConfig& cfg) {
    if (stations.size() < cfg.neighbors.d_spatial + 1)
        throw InsufficientDataError("vine fit needs more stations than spatial neighbors");
    std::vector<double> dists;
    for (std::size_t a = 0; a < stations.size(); ++a)
        for (std::size_t b = a + 1; b < stations.size(); ++b) dists.push_back(dm(stations[a], stations[b]));
    const BinPartition bins = bins_from_distances(dists, cfg.n_bins);

    VineFit fit;
    VineModel& m = fit.model;
    m.neighbors = cfg.neighbors;
    {
        auto g = fit_first_tree_group(up, dm, stations, bins, {0, 0, false}, cfg, m.warnings, up.variables[0]);
        fit.dependent_correlogram = g.correlogram;
        m.dependent = g.copula;
    }
    for (std::size_t var : cfg.neighbors.covariates) {
        if (var == 0 || var >= up.n_vars()) throw DomainError("covariate index out of range");
        auto g = fit_first_tree_group(up, dm, stations, bins, {0, var, cfg.neighbors.colocated_covariates}, cfg,
                                      m.warnings, up.variables[0] + "-" + up.variables[var]);
        fit.covariate_correlograms.push_back(g.correlogram);
        m.covariate.push_back(g.copula);
    }

    fit.training = training_set(up, dm, stations, cfg.neighbors);
    const std::size_t n = fit.training.u0.size(), d = m.dimension();

    MixtureCache cache(m);
    std::vector<std::vector<double>> z(d, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const auto& ns = fit.training.neighborhoods[r];
        for (std::size_t i = 0; i < d; ++i)
            z[i][r] = clip_unit(cache.get(ns.items[i]).h(ns.items[i].u, fit.training.u0[r]), kVineClip);
    }

    m.upper = fit_upper_trees(z, cfg, m.warnings);

    for (std::size_t r = 0; r < n; ++r)
        fit.log_lik += vine_log_density(m, fit.training.u0[r], resolve(m, fit.training.neighborhoods[r], &cache));
    return fit;
}

}  // namespace stvine

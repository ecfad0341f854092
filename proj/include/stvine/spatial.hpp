#pragma once

// Spatio-temporal pair structure of the first vine tree: pooled pair samples
// per distance bin and lag, Kendall's tau correlograms, the tau-distance
// polynomial, the bin-mixture pair copula and neighborhood construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stvine/bins.hpp"
#include "stvine/copula.hpp"
#include "stvine/copula_fit.hpp"
#include "stvine/kendall.hpp"
#include "stvine/pit.hpp"
#include "stvine/random.hpp"

namespace stvine {

inline constexpr int kNumLags = 2;

// ---------------------------------------------------------------------------
// Pair samples and correlograms

/// Which variables a spatio-temporal pair links. The center value is taken at
/// time t, the neighbor value at t - lag.
struct PairSource {
    std::size_t center_var = 0;
    std::size_t neighbor_var = 0;
    /// Pair a station with itself (distance 0); used for covariates.
    bool include_self = false;
};

struct PairCell {
    std::vector<double> x;  // neighbor
    std::vector<double> y;  // center
    std::vector<double> h;  // distance, km
    std::size_t seen = 0;   // observations offered before subsampling
};

/// cells[lag][bin]
struct PairSample {
    BinPartition bins;
    std::array<std::vector<PairCell>, kNumLags> cells;
};

struct PairSampleOptions {
    /// Observations kept per bin-lag cell by seeded reservoir sampling.
    std::size_t max_per_cell = 20000;
    std::uint64_t seed = 0;
};

/// Pool every ordered station pair (among `stations`) and time alignment into
/// bin-lag cells. Pairs beyond the last bin edge are ignored.
inline PairSample collect_pairs(const UniformPanel& up, const DistanceMatrix& dm, const std::vector<std::size_t>& stations,
                                const BinPartition& bins, const PairSource& src, const PairSampleOptions& opt = {}) {
    PairSample ps;
    ps.bins = bins;
    const std::size_t T = up.n_times();
    for (int lag = 0; lag < kNumLags; ++lag) {
        auto& cells = ps.cells[static_cast<std::size_t>(lag)];
        cells.assign(bins.n_bins(), {});
        Rng rng = Rng(opt.seed).split(static_cast<std::uint64_t>(lag));
        for (std::size_t i : stations)
            for (std::size_t j : stations) {
                if (i == j && !src.include_self) continue;
                const double h = dm(i, j);
                const std::size_t b = bins.bin_of(h);
                if (b == BinPartition::npos) continue;
                PairCell& c = cells[b];
                for (std::size_t t = static_cast<std::size_t>(lag); t < T; ++t) {
                    const double y = up(src.center_var, i, t);
                    const double x = up(src.neighbor_var, j, t - static_cast<std::size_t>(lag));
                    if (std::isnan(x) || std::isnan(y)) continue;
                    ++c.seen;
                    if (c.x.size() < opt.max_per_cell) {
                        c.x.push_back(x);
                        c.y.push_back(y);
                        c.h.push_back(h);
                    } else {
                        const std::uint64_t r = rng.below(c.seen);
                        if (r < opt.max_per_cell) {
                            c.x[r] = x;
                            c.y[r] = y;
                            c.h[r] = h;
                        }
                    }
                }
            }
    }
    return ps;
}

struct CorrelogramCell {
    double tau = kNaN;
    std::size_t pairs = 0;
    bool usable = false;
};

struct Correlogram {
    BinPartition bins;
    std::size_t min_pairs = 30;
    std::array<std::vector<CorrelogramCell>, kNumLags> cells;

    const CorrelogramCell& at(int lag, std::size_t bin) const { return cells[static_cast<std::size_t>(lag)][bin]; }
};

inline Correlogram correlogram_from(const PairSample& ps, std::size_t min_pairs = 30) {
    Correlogram cg;
    cg.bins = ps.bins;
    cg.min_pairs = min_pairs;
    for (std::size_t lag = 0; lag < kNumLags; ++lag)
        for (const auto& c : ps.cells[lag]) {
            CorrelogramCell cc;
            cc.pairs = c.seen;
            cc.tau = c.x.size() >= 2 ? kendall_tau(c.x, c.y) : kNaN;
            cc.usable = c.seen >= min_pairs && std::isfinite(cc.tau);
            cg.cells[lag].push_back(cc);
        }
    return cg;
}

inline Correlogram empirical_correlogram(const UniformPanel& up, const BinPartition& bins, const PairSource& src = {},
                                         std::size_t min_pairs = 30, const PairSampleOptions& opt = {}) {
    std::vector<std::size_t> all(up.n_stations());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return correlogram_from(collect_pairs(up, DistanceMatrix(up.stations), all, bins, src, opt), min_pairs);
}

inline void write_correlogram_csv(std::ostream& os, const Correlogram& cg) {
    os << "lag,bin,l_b,tau,pairs\n";
    for (std::size_t lag = 0; lag < kNumLags; ++lag)
        for (std::size_t b = 0; b < cg.bins.n_bins(); ++b) {
            const auto& c = cg.cells[lag][b];
            os << lag << ',' << b + 1 << ',' << detail::format_double(cg.bins.means[b]) << ','
               << (std::isnan(c.tau) ? std::string() : detail::format_double(c.tau)) << ',' << c.pairs << '\n';
        }
}

// ---------------------------------------------------------------------------
// Tau as a polynomial of distance

struct TauPolynomial {
    int degree = 3;
    double h_max = 0.0;
    std::array<std::vector<double>, kNumLags> coef;       // c0 + c1 h + ... (h in km)
    std::array<std::vector<double>, kNumLags> residuals;  // per bin; NaN where the bin was not used

    double raw(double h, int lag) const {
        const auto& c = coef[static_cast<std::size_t>(lag)];
        h = std::clamp(h, 0.0, h_max);
        double s = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) s = s * h + c[k];
        return s;
    }

    /// Polynomial tau at distance h (clamped to [0, h_max]), clipped to [-0.99, 0.99].
    double operator()(double h, int lag) const { return std::clamp(raw(h, lag), -kMaxAbsFitTau, kMaxAbsFitTau); }
};

/// Weighted least squares per lag with the bin pair counts as weights.
inline TauPolynomial fit_tau_polynomial(const Correlogram& cg, int degree) {
    if (degree < 0) throw DomainError("polynomial degree must be non-negative");
    TauPolynomial tp;
    tp.degree = degree;
    tp.h_max = cg.bins.edges.back();
    const double scale = tp.h_max > 0.0 ? tp.h_max : 1.0;
    const auto p = static_cast<Eigen::Index>(degree + 1);
    for (std::size_t lag = 0; lag < kNumLags; ++lag) {
        std::vector<std::size_t> use;
        for (std::size_t b = 0; b < cg.bins.n_bins(); ++b)
            if (cg.cells[lag][b].usable) use.push_back(b);
        if (static_cast<Eigen::Index>(use.size()) < p)
            throw FitError("tau polynomial of degree " + std::to_string(degree) + " at lag " + std::to_string(lag) +
                           " is underdetermined: " + std::to_string(use.size()) + " usable bin(s)");
        Eigen::MatrixXd X(static_cast<Eigen::Index>(use.size()), p);
        Eigen::VectorXd y(X.rows());
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            const std::size_t b = use[static_cast<std::size_t>(r)];
            const double w = std::sqrt(static_cast<double>(cg.cells[lag][b].pairs));
            const double x = cg.bins.means[b] / scale;
            double xp = 1.0;
            for (Eigen::Index k = 0; k < p; ++k, xp *= x) X(r, k) = w * xp;
            y(r) = w * cg.cells[lag][b].tau;
        }
        const Eigen::VectorXd a = X.colPivHouseholderQr().solve(y);
        auto& c = tp.coef[lag];
        c.resize(static_cast<std::size_t>(p));
        for (Eigen::Index k = 0; k < p; ++k) c[static_cast<std::size_t>(k)] = a(k) / std::pow(scale, static_cast<double>(k));
        tp.residuals[lag].assign(cg.bins.n_bins(), kNaN);
        for (std::size_t b : use) tp.residuals[lag][b] = cg.cells[lag][b].tau - tp.raw(cg.bins.means[b], static_cast<int>(lag));
    }
    return tp;
}

inline void write_tau_polynomial_csv(std::ostream& os, const TauPolynomial& tp) {
    os << "lag";
    for (int k = 0; k <= tp.degree; ++k) os << ",c" << k;
    os << '\n';
    for (std::size_t lag = 0; lag < kNumLags; ++lag) {
        os << lag;
        for (double c : tp.coef[lag]) os << ',' << detail::format_double(c);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Bin-mixture spatio-temporal copula

/// wa * c_a + wb * c_b + (1 - wa - wb) * independence. The first argument is
/// the neighbor, the second the center.
struct PairMixture {
    BivariateCopulaSpec a, b;
    double wa = 0.0, wb = 0.0;

    bool is_independence() const {
        return (wa == 0.0 || a.family == Family::Independence) && (wb == 0.0 || b.family == Family::Independence);
    }

    double pdf(double x, double y) const {
        double s = 1.0 - wa - wb;
        if (wa > 0.0) s += wa * std::exp(copula_eval(a, x, y, true, false).log_pdf);
        if (wb > 0.0) s += wb * std::exp(copula_eval(b, x, y, true, false).log_pdf);
        return s;
    }

    double log_pdf(double x, double y) const {
        if (wb == 0.0 && wa == 1.0) return copula_eval(a, x, y, true, false).log_pdf;
        return std::log(pdf(x, y));
    }

    /// h(x | y) = dC(x, y)/dy.
    double h(double x, double y) const {
        double s = (1.0 - wa - wb) * x;
        if (wa > 0.0) s += wa * copula_eval(a, x, y, false, true).h;
        if (wb > 0.0) s += wb * copula_eval(b, x, y, false, true).h;
        return std::clamp(s, 0.0, 1.0);
    }

    /// Inverse of x -> h(x | y).
    double h_inv(double p, double y) const {
        if (wb == 0.0 && wa == 1.0) return h_inverse(a, p, y);
        if (is_independence()) return p;
        return newton_increasing([&](double x) { return h(x, y); }, [&](double x) { return pdf(x, y); }, p, 0.0, 1.0, p,
                                 1e-14, 1e-13, 400);
    }
};

struct StCopula {
    BinPartition bins;
    TauPolynomial poly;
    /// Family, rotation and df per lag and bin; the parameter comes from `poly`.
    std::array<std::vector<BivariateCopulaSpec>, kNumLags> protos;

    BivariateCopulaSpec component(int lag, std::size_t bin, double h) const {
        return with_tau(protos[static_cast<std::size_t>(lag)][bin], poly(h, lag));
    }

    /// Mixture weights between the bin means; independence beyond the last mean.
    PairMixture at(double h, int lag) const {
        const auto& l = bins.means;
        const std::size_t B = l.size();
        PairMixture m;
        if (h < l[0]) {
            m.a = component(lag, 0, h);
            m.wa = 1.0;
            return m;
        }
        if (h >= l[B - 1]) return m;
        std::size_t k = 1;
        while (!(h < l[k])) ++k;
        const double lambda = (h - l[k - 1]) / (l[k] - l[k - 1]);
        m.a = component(lag, k - 1, h);
        m.wa = 1.0 - lambda;
        if (k < B - 1) {
            m.b = component(lag, k, h);
            m.wb = lambda;
        }
        return m;
    }

    double density(double h, int lag, double x, double y) const { return at(h, lag).pdf(x, y); }
};

inline double st_copula_density(const StCopula& st, double h, int lag, double u, double v) {
    if (h < 0.0) throw DomainError("distance must be non-negative");
    if (lag < 0 || lag >= kNumLags) throw DomainError("lag must be 0 or 1");
    return st.density(h, lag, u, v);
}

struct StCopulaFitOptions {
    std::vector<Family> candidates = default_candidates();
    std::size_t min_pairs = 30;
    std::size_t max_pairs = 5000;
    std::uint64_t seed = 0;
};

/// Family selection per bin and lag on the pooled pairs of that cell, each
/// pair's parameter given by the polynomial at its distance. Cells below the
/// pair threshold get Independence.
inline StCopula fit_st_copula(const PairSample& ps, const TauPolynomial& poly, const StCopulaFitOptions& opt = {}) {
    StCopula st;
    st.bins = ps.bins;
    st.poly = poly;
    for (std::size_t lag = 0; lag < kNumLags; ++lag)
        for (std::size_t b = 0; b < ps.bins.n_bins(); ++b) {
            const PairCell& c = ps.cells[lag][b];
            BivariateCopulaSpec proto = independence_copula();
            if (c.x.size() >= opt.min_pairs) {
                std::vector<double> taus(c.h.size());
                for (std::size_t i = 0; i < taus.size(); ++i) taus[i] = poly(c.h[i], static_cast<int>(lag));
                FitFamilyOptions fo;
                fo.candidates = opt.candidates;
                fo.min_pairs = opt.min_pairs;
                fo.max_pairs = opt.max_pairs;
                fo.seed = opt.seed + 31 * lag + b;
                proto = fit_family_varying(c.x, c.y, taus, fo).spec;
            }
            st.protos[lag].push_back(proto);
        }
    return st;
}

// ---------------------------------------------------------------------------
// Neighborhoods

enum class NeighborGroup { CovariateV, CovariateW, Dependent };

struct Neighbor {
    NeighborGroup group = NeighborGroup::Dependent;
    std::size_t station = 0;
    std::size_t var = 0;
    int lag = 0;
    double dist = 0.0;
    double u = 0.5;
};

/// Ordered [v neighbors, w neighbors, dependent neighbors]; within a group
/// by distance, then station id, then lag.
struct NeighborSet {
    std::size_t center = 0;
    std::size_t time = 0;  // 0-based index into the panel's time axis
    std::vector<Neighbor> items;

    std::size_t size() const { return items.size(); }
};

struct NeighborConfig {
    std::size_t d_spatial = 3;
    std::size_t dc_spatial = 1;
    /// Panel variable index of each covariate used (at most two).
    std::vector<std::size_t> covariates{1, 2};
    /// The center station's own covariates count as a neighbor at distance 0.
    bool colocated_covariates = true;
    /// Temporal lags taken per neighbor station: 2 (lags 0 and 1) or 1 (lag 0 only).
    int lags = kNumLags;

    std::size_t dimension() const {
        return static_cast<std::size_t>(lags) * (d_spatial + dc_spatial * covariates.size());
    }

    /// First time index with every requested lag available.
    std::size_t first_time() const { return static_cast<std::size_t>(lags - 1); }
};

namespace detail {

inline std::vector<std::size_t> nearest(const UniformPanel& up, const DistanceMatrix& dm, std::size_t center,
                                        const std::vector<std::size_t>& pool, bool allow_center, std::size_t k) {
    std::vector<std::size_t> cand;
    for (std::size_t s : pool)
        if (s != center) cand.push_back(s);
    if (allow_center) cand.push_back(center);
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
        const double da = a == center ? 0.0 : dm(center, a), db = b == center ? 0.0 : dm(center, b);
        if (da != db) return da < db;
        return up.stations[a].id < up.stations[b].id;
    });
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    if (cand.size() < k)
        throw InsufficientDataError("neighborhood needs " + std::to_string(k) + " stations, only " +
                                    std::to_string(cand.size()) + " available");
    cand.resize(k);
    return cand;
}

}  // namespace detail

/// Neighbors of (center, time) drawn from the stations in `pool`.
inline NeighborSet build_neighborhood(const UniformPanel& up, const DistanceMatrix& dm, std::size_t center,
                                      std::size_t time, const std::vector<std::size_t>& pool, const NeighborConfig& cfg) {
    if (cfg.lags < 1 || cfg.lags > kNumLags) throw DomainError("neighbor lags must be 1 or 2");
    if (time < cfg.first_time()) throw BoundaryError("center at the first time step has no lag-1 neighbors");
    if (time >= up.n_times()) throw DomainError("center time outside the panel");
    if (cfg.covariates.size() > 2) throw DomainError("at most two covariates");
    NeighborSet ns;
    ns.center = center;
    ns.time = time;
    auto add = [&](NeighborGroup g, std::size_t var, const std::vector<std::size_t>& sts) {
        for (std::size_t s : sts)
            for (int lag = 0; lag < cfg.lags; ++lag) {
                const double u = up(var, s, time - static_cast<std::size_t>(lag));
                if (std::isnan(u))
                    throw DomainError("neighbor value missing at station '" + up.stations[s].id + "'");
                ns.items.push_back({g, s, var, lag, s == center ? 0.0 : dm(center, s), u});
            }
    };
    if (cfg.dc_spatial > 0 && !cfg.covariates.empty()) {
        const auto cov = detail::nearest(up, dm, center, pool, cfg.colocated_covariates, cfg.dc_spatial);
        for (std::size_t c = 0; c < cfg.covariates.size(); ++c)
            add(c == 0 ? NeighborGroup::CovariateV : NeighborGroup::CovariateW, cfg.covariates[c], cov);
    }
    add(NeighborGroup::Dependent, 0, detail::nearest(up, dm, center, pool, false, cfg.d_spatial));
    return ns;
}

}  // namespace stvine

#pragma once

// Synthetic panels with a known distance-decay dependence, and joint
// sampling from a fitted vine.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stvine/copula.hpp"
#include "stvine/geo.hpp"
#include "stvine/marginal.hpp"
#include "stvine/panel.hpp"
#include "stvine/random.hpp"
#include "stvine/vine.hpp"

namespace stvine {

struct SyntheticOptions {
    std::size_t stations = 30;
    std::size_t times = 60;
    double extent_km = 300.0;
    /// Pairwise Kendall's tau at distance h is tau0 * exp(-h / scale_km).
    double tau0 = 0.6;
    double scale_km = 100.0;
    /// AR(1) coefficient of the latent normal scores over time.
    double ar = 0.3;
    /// Gumbel tau linking each covariate to the co-located dependent value.
    double cov_tau_v = 0.5;
    double cov_tau_w = 0.3;
    std::uint64_t seed = 1;
};

inline double synthetic_tau(const SyntheticOptions& o, double h) { return o.tau0 * std::exp(-h / o.scale_km); }

/// Stations uniform on a square; dependent value from a Gaussian-copula field
/// whose correlation sin(pi tau(h) / 2) gives every station pair exactly the
/// target Kendall's tau; covariates from Gumbel copulas on the co-located
/// dependent value; right-skewed Gumbel marginals throughout.
inline PanelDataset simulate_panel(const SyntheticOptions& o) {
    if (o.stations < 2 || o.times < 2) throw DomainError("synthetic panel needs at least 2 stations and 2 times");
    if (!(std::abs(o.ar) < 1.0)) throw DomainError("AR coefficient must lie in (-1, 1)");
    Rng rng(o.seed);
    PanelDataset ds;
    ds.variables = {"pm10", "pm25", "co"};
    for (std::size_t s = 0; s < o.stations; ++s)
        ds.stations.push_back(
            station_at_km("S" + std::to_string(s + 1), o.extent_km * rng.uniform(), o.extent_km * rng.uniform()));
    for (std::size_t t = 0; t < o.times; ++t) ds.times.push_back(static_cast<int>(t + 1));
    ds.resize();

    const DistanceMatrix dm(ds.stations);
    const auto n = static_cast<Eigen::Index>(o.stations);
    Eigen::MatrixXd R(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            R(i, j) = i == j ? 1.0
                             : std::sin(0.5 * std::numbers::pi *
                                        synthetic_tau(o, dm(static_cast<std::size_t>(i), static_cast<std::size_t>(j))));
    const Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) throw NumericError("synthetic correlation matrix is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();

    const BivariateCopulaSpec link_v = spec_from_tau(Family::Gumbel, o.cov_tau_v);
    const BivariateCopulaSpec link_w = spec_from_tau(Family::Gumbel, o.cov_tau_w);
    const double innov = std::sqrt(1.0 - o.ar * o.ar);
    Eigen::VectorXd z(n), e(n);
    for (std::size_t t = 0; t < o.times; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) e(i) = rng.normal();
        e = L * e;
        z = t == 0 ? e : Eigen::VectorXd(o.ar * z + innov * e);
        for (std::size_t s = 0; s < o.stations; ++s) {
            const double u0 = clip_unit(norm_cdf(z(static_cast<Eigen::Index>(s))), 1e-12);
            const double uv = h_inverse(link_v, rng.uniform_open(), u0);
            const double uw = h_inverse(link_w, rng.uniform_open(), u0);
            // location drifts across the square so stations differ in level
            const double a0 = 30.0 + 20.0 * (static_cast<double>(s % 7) / 6.0);
            ds(0, s, t) = std::max(0.0, marginal_quantile({MarginalFamily::Gumbel, a0, 12.0, 0.0}, u0));
            ds(1, s, t) = std::max(0.0, marginal_quantile({MarginalFamily::Gumbel, 0.6 * a0, 8.0, 0.0}, uv));
            ds(2, s, t) = std::max(0.0, marginal_quantile({MarginalFamily::Gumbel, 0.5, 0.15, 0.0}, uw));
        }
    }
    return ds;
}

/// One joint draw of (u0, neighbor values) from the vine density with tree-1
/// mixtures fixed by `rn` (its u values are ignored), by sequential inversion
/// of the h-functions.
inline std::pair<double, std::vector<double>> sample_vine(const VineModel& m, const ResolvedNeighbors& rn, Rng& rng) {
    const std::size_t d = rn.tree1.size();
    const double u0 = rng.uniform_open();
    std::vector<double> w(d), u(d);
    for (std::size_t j = 0; j < d; ++j) {
        w[j] = rng.uniform_open();
        double v = w[j];
        for (std::size_t k = j; k-- > 0;) {
            const BivariateCopulaSpec& s = m.upper[m.upper_index(k, j)];
            if (s.family != Family::Independence) v = clip_unit(h_inverse(s, v, w[k]), kVineClip);
        }
        u[j] = clip_unit(rn.tree1[j].h_inv(v, u0), kVineClip);
    }
    return {u0, u};
}

}  // namespace stvine

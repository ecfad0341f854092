#pragma once

// Variogram estimation and ordinary / universal kriging of one time slice.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stvine/bins.hpp"
#include "stvine/error.hpp"
#include "stvine/numeric.hpp"
#include "stvine/random.hpp"

namespace stvine {

enum class VariogramModel { Spherical, Exponential, Gaussian };

inline std::string_view variogram_name(VariogramModel m) {
    switch (m) {
        case VariogramModel::Spherical: return "spherical";
        case VariogramModel::Exponential: return "exponential";
        case VariogramModel::Gaussian: return "gaussian";
    }
    return "?";
}

inline VariogramModel parse_variogram(std::string_view s) {
    if (s == "spherical") return VariogramModel::Spherical;
    if (s == "exponential") return VariogramModel::Exponential;
    if (s == "gaussian") return VariogramModel::Gaussian;
    throw DomainError("unknown variogram model '" + std::string(s) + "'");
}

inline constexpr std::array<VariogramModel, 3> kBaselineVariograms{VariogramModel::Spherical, VariogramModel::Exponential,
                                                                   VariogramModel::Gaussian};
inline constexpr std::array<VariogramModel, 2> kImputationVariograms{VariogramModel::Spherical,
                                                                     VariogramModel::Exponential};

/// `sill` is the total sill (nugget included).
struct VariogramSpec {
    VariogramModel model = VariogramModel::Spherical;
    double nugget = 0.0;
    double sill = 1.0;
    double range = 1.0;
    double sse = 0.0;
};

inline double semivariance(const VariogramSpec& v, double h) {
    if (h <= 0.0) return 0.0;
    const double r = h / v.range;
    double shape = 1.0;
    switch (v.model) {
        case VariogramModel::Spherical: shape = r < 1.0 ? 1.5 * r - 0.5 * r * r * r : 1.0; break;
        case VariogramModel::Exponential: shape = -std::expm1(-r); break;
        case VariogramModel::Gaussian: shape = -std::expm1(-r * r); break;
    }
    return v.nugget + (v.sill - v.nugget) * shape;
}

struct EmpiricalVariogram {
    std::vector<double> h;      // mean pair distance per bin
    std::vector<double> gamma;  // half mean squared difference
    std::vector<std::size_t> pairs;

    std::size_t nonempty() const {
        return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](std::size_t n) { return n > 0; }));
    }
};

/// Binned semivariance of `values` observed at points with distance matrix D.
/// Pairs beyond the last edge are ignored.
inline EmpiricalVariogram empirical_variogram(const Eigen::MatrixXd& D, std::span<const double> values,
                                              const BinPartition& bins) {
    const std::size_t n = values.size();
    if (static_cast<std::size_t>(D.rows()) != n || static_cast<std::size_t>(D.cols()) != n)
        throw ShapeError("empirical_variogram: distance matrix does not match the values");
    const std::size_t B = bins.n_bins();
    EmpiricalVariogram ev{std::vector<double>(B, 0.0), std::vector<double>(B, 0.0), std::vector<std::size_t>(B, 0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double h = D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const std::size_t b = bins.bin_of(h);
            if (b == BinPartition::npos) continue;
            const double d = values[i] - values[j];
            ev.h[b] += h;
            ev.gamma[b] += 0.5 * d * d;
            ++ev.pairs[b];
        }
    for (std::size_t b = 0; b < B; ++b) {
        if (ev.pairs[b] == 0) continue;
        ev.h[b] /= static_cast<double>(ev.pairs[b]);
        ev.gamma[b] /= static_cast<double>(ev.pairs[b]);
    }
    return ev;
}

inline double variogram_sse(const VariogramSpec& v, const EmpiricalVariogram& ev) {
    double s = 0.0;
    for (std::size_t b = 0; b < ev.h.size(); ++b) {
        if (ev.pairs[b] == 0) continue;
        const double r = ev.gamma[b] - semivariance(v, ev.h[b]);
        s += r * r;
    }
    return s;
}

/// Least-squares fit of each candidate model over (log nugget, log partial
/// sill, log range) from five seeded simplex starts; the smallest SSE wins.
inline VariogramSpec fit_variogram(const EmpiricalVariogram& ev, std::span<const VariogramModel> candidates,
                                   std::uint64_t seed = 0, std::size_t min_bins = 5) {
    if (candidates.empty()) throw DomainError("fit_variogram: no candidate models");
    if (ev.nonempty() < min_bins)
        throw InsufficientDataError("fit_variogram needs " + std::to_string(min_bins) + " populated bins, got " +
                                    std::to_string(ev.nonempty()));
    double gmax = 0.0, hmax = 0.0;
    for (std::size_t b = 0; b < ev.h.size(); ++b)
        if (ev.pairs[b]) {
            gmax = std::max(gmax, ev.gamma[b]);
            hmax = std::max(hmax, ev.h[b]);
        }
    if (gmax <= 0.0) {
        // constant field: flat zero variogram
        return {candidates.front(), 0.0, 0.0, std::max(hmax, 1e-9), 0.0};
    }

    VariogramSpec best;
    best.sse = kInf;
    bool any = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const VariogramModel m = candidates[c];
        auto unpack = [&](const std::vector<double>& x) {
            const double nug = std::exp(x[0]);
            return VariogramSpec{m, nug, nug + std::exp(x[1]), std::exp(x[2]), 0.0};
        };
        auto obj = [&](const std::vector<double>& x) {
            for (double xi : x)
                if (!(std::abs(xi) < 60.0)) return kInf;
            return variogram_sse(unpack(x), ev) / (gmax * gmax);
        };
        Rng rng = Rng(seed).split(c);
        SimplexOptions opt;
        opt.max_iter = 1500;
        opt.ftol = 1e-12;
        opt.xtol = 1e-8;
        for (int start = 0; start < 5; ++start) {
            double nug = 0.05 * gmax, ps = gmax, rg = hmax / 3.0;
            if (start > 0) {
                nug = gmax * (0.001 + 0.5 * rng.uniform());
                ps = gmax * (0.2 + 1.8 * rng.uniform());
                rg = hmax * (0.05 + 0.95 * rng.uniform());
            }
            const auto r = nelder_mead(obj, {std::log(nug), std::log(ps), std::log(rg)}, {0.7, 0.7, 0.7}, opt);
            if (!std::isfinite(r.value)) continue;
            VariogramSpec s = unpack(r.x);
            s.sse = variogram_sse(s, ev);
            if (!any || s.sse < best.sse) {
                best = s;
                any = true;
            }
        }
    }
    if (!any) throw FitError("variogram fit failed for every candidate model");
    return best;
}

enum class KrigingMode { Ordinary, Universal };

struct KrigingResult {
    double value = 0.0;
    double variance = 0.0;
    Eigen::VectorXd weights;
};

/// Kriging system in semivariogram form, factored once for many targets.
/// D: distances among the n observations. In universal mode `drift` (n x p)
/// holds the drift covariates; a constant term is always included.
class KrigingSystem {
public:
    KrigingSystem(const Eigen::MatrixXd& D, std::span<const double> values, const VariogramSpec& vg,
                  KrigingMode mode = KrigingMode::Ordinary, const Eigen::MatrixXd& drift = {})
        : vg_(vg), values_(values.begin(), values.end()) {
        n_ = static_cast<Eigen::Index>(values.size());
        if (n_ < 3) throw InsufficientDataError("kriging needs at least 3 observations");
        if (D.rows() != n_ || D.cols() != n_) throw ShapeError("krige: distance shapes do not match");
        p_ = 1;
        if (mode == KrigingMode::Universal) {
            if (drift.rows() != n_) throw ShapeError("krige: universal mode needs drift covariates at every site");
            p_ += drift.cols();
        }
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_ + p_, n_ + p_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            for (Eigen::Index j = 0; j < n_; ++j) A(i, j) = semivariance(vg, D(i, j));
            A(i, n_) = A(n_, i) = 1.0;
            for (Eigen::Index k = 1; k < p_; ++k) A(i, n_ + k) = A(n_ + k, i) = drift(i, k - 1);
        }
        lu_.compute(A);
        if (lu_.rank() < A.rows()) {
            for (Eigen::Index i = 0; i < n_; ++i) A(i, i) += 1e-8;
            lu_.compute(A);
            if (lu_.rank() < A.rows()) throw NumericError("kriging system is singular even after ridge regularization");
        }
    }

    /// d0: distances from each observation to the target; drift0: the target's drift covariates.
    KrigingResult predict(const Eigen::VectorXd& d0, const Eigen::VectorXd& drift0 = {}) const {
        if (d0.size() != n_) throw ShapeError("krige: target distances do not match the observations");
        if (drift0.size() != p_ - 1) throw ShapeError("krige: target drift covariates do not match the system");
        Eigen::VectorXd rhs(n_ + p_);
        for (Eigen::Index i = 0; i < n_; ++i) rhs(i) = semivariance(vg_, d0(i));
        rhs(n_) = 1.0;
        for (Eigen::Index k = 1; k < p_; ++k) rhs(n_ + k) = drift0(k - 1);
        const Eigen::VectorXd x = lu_.solve(rhs);
        if (!x.allFinite()) throw NumericError("kriging solve produced non-finite weights");
        KrigingResult out;
        out.weights = x.head(n_);
        for (Eigen::Index i = 0; i < n_; ++i) out.value += out.weights(i) * values_[static_cast<std::size_t>(i)];
        out.variance = std::max(0.0, x.dot(rhs));
        return out;
    }

private:
    VariogramSpec vg_;
    std::vector<double> values_;
    Eigen::Index n_ = 0, p_ = 1;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

inline KrigingResult krige(const Eigen::MatrixXd& D, const Eigen::VectorXd& d0, std::span<const double> values,
                           const VariogramSpec& vg, KrigingMode mode = KrigingMode::Ordinary,
                           const Eigen::MatrixXd& drift = {}, const Eigen::VectorXd& drift0 = {}) {
    return KrigingSystem(D, values, vg, mode, drift).predict(d0, drift0);
}

/// Exponential variogram with zero nugget, the sample variance as sill and a
/// third of the largest distance as range; used where too few bins are
/// populated for a fit.
inline VariogramSpec fallback_variogram(std::span<const double> values, double hmax) {
    double mean = 0.0, var = 0.0;
    for (double x : values) mean += x / static_cast<double>(values.size());
    if (values.size() > 1)
        for (double x : values) var += (x - mean) * (x - mean) / static_cast<double>(values.size() - 1);
    return {VariogramModel::Exponential, 0.0, var, std::max(hmax, 1e-9) / 3.0, 0.0};
}

}  // namespace stvine

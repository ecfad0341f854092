#pragma once

// Predictive mean, quantiles and intervals from the conditional vine
// distribution, and the evaluation metrics.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "stvine/marginal.hpp"
#include "stvine/vine.hpp"

namespace stvine {

struct Prediction {
    std::size_t station = 0;
    std::size_t time = 0;
    double mean = kNaN;
    std::vector<std::pair<double, double>> quantiles;  // (p, value)
    double lower = kNaN;  // 2.5% quantile
    double upper = kNaN;  // 97.5% quantile
};

struct PredictOptions {
    QuadratureOptions quadrature;
    std::vector<double> levels;  // extra quantile levels besides 0.025 and 0.975
};

/// Prediction from an already resolved neighbor set; `target` is the marginal
/// used to map u0 back to the data scale.
inline Prediction predict_resolved(const VineModel& m, const ResolvedNeighbors& rn, const MarginalSpec& target,
                                   const PredictOptions& opt = {}) {
    const ConditionalDistribution cd(m, rn, opt.quadrature);
    const double clip = opt.quadrature.clip;
    auto finv = [&](double u) { return marginal_quantile(target, std::clamp(u, clip, 1.0 - clip)); };
    Prediction p;
    p.mean = cd.expectation(finv);
    p.lower = finv(cd.quantile(0.025));
    p.upper = finv(cd.quantile(0.975));
    for (double lv : opt.levels) p.quantiles.emplace_back(lv, finv(cd.quantile(lv)));
    return p;
}

inline Prediction predict(const VineModel& m, const NeighborSet& ns, const MarginalSpec& target,
                          const PredictOptions& opt = {}) {
    Prediction p = predict_resolved(m, resolve(m, ns), target, opt);
    p.station = ns.center;
    p.time = ns.time;
    return p;
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
};

inline Metrics metrics(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.size() != predicted.size()) throw ShapeError("metrics: observed and predicted differ in length");
    if (observed.empty()) throw InsufficientDataError("metrics need at least one pair");
    double a = 0.0, s = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        a += std::abs(e);
        s += e * e;
    }
    const double n = static_cast<double>(observed.size());
    return {a / n, std::sqrt(s / n)};
}

/// Indices of the ceil(n * fraction) largest values; ties go to the lower index.
inline std::vector<std::size_t> extreme_subset(std::span<const double> observed, double fraction = 0.05) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("extreme fraction must lie in (0, 1)");
    const std::size_t n = observed.size();
    // guard against 100 * 0.05 evaluating to 5.000000000000001
    const std::size_t k = std::min(n, static_cast<std::size_t>(std::ceil(static_cast<double>(n) * fraction - 1e-9)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return observed[a] > observed[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct Coverage {
    std::size_t count = 0;
    double percent = 0.0;
};

inline Coverage interval_coverage(std::span<const Prediction> preds, std::span<const double> observed) {
    if (preds.size() != observed.size()) throw ShapeError("interval_coverage: lists are not aligned");
    Coverage c;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].lower <= observed[i] && observed[i] <= preds[i].upper) ++c.count;
    c.percent = preds.empty() ? 0.0 : 100.0 * static_cast<double>(c.count) / static_cast<double>(preds.size());
    return c;
}

}  // namespace stvine

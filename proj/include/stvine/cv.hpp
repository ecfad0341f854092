#pragma once

// Station-fold cross-validation of the vine models and the kriging baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "stvine/kriging.hpp"
#include "stvine/pit.hpp"
#include "stvine/predict.hpp"
#include "stvine/vine.hpp"

namespace stvine {

enum class ModelKind { Vine, GaussianVine, Stcv, Kriging };

inline std::string_view model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Vine: return "vine";
        case ModelKind::GaussianVine: return "gaussian-vine";
        case ModelKind::Stcv: return "stcv";
        case ModelKind::Kriging: return "kriging";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
    for (ModelKind k : {ModelKind::Vine, ModelKind::GaussianVine, ModelKind::Stcv, ModelKind::Kriging})
        if (model_kind_name(k) == s) return k;
    throw DomainError("unknown model kind '" + std::string(s) + "'");
}

/// The vine restricted to Gaussian pair copulas at every level and bin.
inline VineConfig gaussian_vine_config(VineConfig base = {}) {
    base.tree1_candidates = {Family::Gaussian};
    base.upper_candidates = {Family::Gaussian};
    return base;
}

/// Vine configuration used for a model kind; the kriging kind only reads the covariate list.
inline VineConfig vine_config_for(ModelKind k, VineConfig base) {
    if (k == ModelKind::GaussianVine) return gaussian_vine_config(std::move(base));
    if (k == ModelKind::Stcv) base.neighbors.covariates.clear();
    return base;
}

struct CvConfig {
    VineConfig vine;
    MarginalFamily marginal = MarginalFamily::Gumbel;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    QuadratureOptions quadrature;
    double extreme_fraction = 0.05;
    std::size_t threads = 1;
};

/// Stations shuffled by the seed and dealt round-robin into k folds.
inline std::vector<std::vector<std::size_t>> assign_folds(std::size_t n_stations, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw DomainError("cross-validation needs at least 2 folds");
    if (n_stations < k)
        throw InsufficientDataError("cross-validation with " + std::to_string(k) + " folds needs at least " +
                                    std::to_string(k) + " stations, got " + std::to_string(n_stations));
    std::vector<std::size_t> order(n_stations);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct VariogramRecord {
    std::size_t fold = 0;
    int time = 0;
    VariogramSpec spec;
};

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::size_t> held_out;
    std::vector<std::size_t> training;
    bool skipped = false;
    /// Fitted vine of the fold; empty for the kriging kind.
    VineModel model;
    std::vector<Prediction> predictions;
    std::vector<double> observed;
    Metrics all, extreme;
    Coverage coverage;
};

struct EvalReport {
    ModelKind kind = ModelKind::Vine;
    MarginalFamily marginal = MarginalFamily::Gumbel;
    std::vector<FoldResult> folds;
    std::vector<VariogramRecord> variograms;
    std::vector<std::string> warnings;
    /// Means over the folds that were evaluated.
    Metrics mean_all, mean_extreme;
    double mean_coverage_pct = 0.0;
    std::size_t total_covered = 0, total_targets = 0;
};

namespace detail {

// Run fn(i, worker) for i in [0, n) on up to `threads` workers, contiguous chunks.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i, w);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline void finish_fold(FoldResult& f, double extreme_fraction) {
    std::vector<double> pred(f.predictions.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = f.predictions[i].mean;
    f.all = metrics(f.observed, pred);
    const auto ext = extreme_subset(f.observed, extreme_fraction);
    std::vector<double> eo, ep;
    for (std::size_t i : ext) {
        eo.push_back(f.observed[i]);
        ep.push_back(pred[i]);
    }
    f.extreme = metrics(eo, ep);
    f.coverage = interval_coverage(f.predictions, f.observed);
}

inline void vine_fold(const PanelDataset& ds, const UniformPanel& up, const DistanceMatrix& dm,
                      const MarginalTable& tab, const VineConfig& vc, const CvConfig& cfg, FoldResult& f,
                      std::vector<std::string>& warnings) {
    const VineFit fit = fit_vine(up, dm, f.training, vc);
    for (const auto& w : fit.model.warnings) warnings.push_back("fold " + std::to_string(f.fold + 1) + ": " + w);
    std::vector<std::pair<std::size_t, std::size_t>> targets;
    for (std::size_t s : f.held_out)
        for (std::size_t t = vc.neighbors.first_time(); t < ds.n_times(); ++t) targets.emplace_back(s, t);
    std::vector<Prediction> preds(targets.size());
    std::vector<char> ok(targets.size(), 0);
    std::vector<std::string> errs(targets.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, targets.size()));
    std::vector<MixtureCache> caches(workers, MixtureCache(fit.model));
    PredictOptions po;
    po.quadrature = cfg.quadrature;
    parallel_for(targets.size(), workers, [&](std::size_t i, std::size_t w) {
        const auto [s, t] = targets[i];
        const NeighborSet ns = build_neighborhood(up, dm, s, t, f.training, vc.neighbors);
        try {
            preds[i] = predict_resolved(fit.model, resolve(fit.model, ns, &caches[w]),
                                        tab.at(ds.stations[s].id, ds.variables[0]).spec, po);
            preds[i].station = s;
            preds[i].time = t;
            ok[i] = 1;
        } catch (const DegenerateDensityError& e) {
            errs[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!ok[i]) {
            warnings.push_back("fold " + std::to_string(f.fold + 1) + ": target (" + ds.stations[targets[i].first].id +
                               ", " + std::to_string(ds.times[targets[i].second]) + ") skipped: " + errs[i]);
            continue;
        }
        f.predictions.push_back(preds[i]);
        f.observed.push_back(ds(0, targets[i].first, targets[i].second));
    }
    f.model = fit.model;
}

}  // namespace detail

/// Kriging at one time slice from the `training` stations to each of `targets`.
struct KrigingSlice {
    VariogramSpec variogram;
    bool fallback = false;
    std::vector<Prediction> predictions;
};

inline KrigingSlice krige_slice(const PanelDataset& ds, const DistanceMatrix& dm, const std::vector<std::size_t>& training,
                                const std::vector<std::size_t>& targets, std::size_t t, const VineConfig& vc,
                                std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(training.size());
    Eigen::MatrixXd D(n, n);
    std::vector<double> dists;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            D(i, j) = dm(training[static_cast<std::size_t>(i)], training[static_cast<std::size_t>(j)]);
            if (j > i) dists.push_back(D(i, j));
        }
    const BinPartition bins = bins_from_distances(dists, vc.n_bins, false);
    const auto& covs = vc.neighbors.covariates;
    const KrigingMode mode = covs.empty() ? KrigingMode::Ordinary : KrigingMode::Universal;
    std::vector<double> vals(training.size());
    Eigen::MatrixXd drift(n, static_cast<Eigen::Index>(covs.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t s = training[static_cast<std::size_t>(i)];
        vals[static_cast<std::size_t>(i)] = ds(0, s, t);
        for (std::size_t c = 0; c < covs.size(); ++c) drift(i, static_cast<Eigen::Index>(c)) = ds(covs[c], s, t);
    }
    KrigingSlice out;
    const EmpiricalVariogram ev = empirical_variogram(D, vals, bins);
    if (ev.nonempty() >= 5) {
        out.variogram = fit_variogram(ev, kBaselineVariograms, seed);
    } else {
        out.variogram = fallback_variogram(vals, dists.empty() ? 0.0 : *std::max_element(dists.begin(), dists.end()));
        out.fallback = true;
    }
    const KrigingSystem sys(D, vals, out.variogram, mode, drift);
    for (std::size_t s : targets) {
        Eigen::VectorXd d0(n), x0(static_cast<Eigen::Index>(covs.size()));
        for (Eigen::Index i = 0; i < n; ++i) d0(i) = dm(training[static_cast<std::size_t>(i)], s);
        for (std::size_t c = 0; c < covs.size(); ++c) x0(static_cast<Eigen::Index>(c)) = ds(covs[c], s, t);
        const KrigingResult kr = sys.predict(d0, x0);
        Prediction p;
        p.station = s;
        p.time = t;
        p.mean = kr.value;
        const double half = 1.959963984540054 * std::sqrt(kr.variance);
        p.lower = kr.value - half;
        p.upper = kr.value + half;
        out.predictions.push_back(p);
    }
    return out;
}

namespace detail {

inline void kriging_fold(const PanelDataset& ds, const DistanceMatrix& dm, const VineConfig& vc, const CvConfig& cfg,
                         FoldResult& f, std::vector<VariogramRecord>& vgs, std::vector<std::string>& warnings) {
    std::size_t fallbacks = 0;
    for (std::size_t t = vc.neighbors.first_time(); t < ds.n_times(); ++t) {
        KrigingSlice ks = krige_slice(ds, dm, f.training, f.held_out, t, vc, cfg.seed + 104729 * f.fold + t);
        fallbacks += ks.fallback ? 1 : 0;
        vgs.push_back({f.fold, ds.times[t], ks.variogram});
        for (const Prediction& p : ks.predictions) {
            f.predictions.push_back(p);
            f.observed.push_back(ds(0, p.station, t));
        }
    }
    if (fallbacks)
        warnings.push_back("fold " + std::to_string(f.fold + 1) + ": " + std::to_string(fallbacks) +
                           " slice(s) had fewer than 5 populated variogram bins; fallback variogram used");
}

}  // namespace detail

/// Hold out each fold's stations in turn, refit on the rest and predict every
/// held-out (station, time) with a lag-1 predecessor. Marginals are fitted once
/// per station on its own series, so `marginals` may be shared across folds.
inline EvalReport cross_validate(const PanelDataset& ds, const MarginalTable& marginals, ModelKind kind,
                                 const CvConfig& cfg) {
    if (ds.missing_count() > 0) throw DomainError("cross-validation needs a complete panel; impute first");
    if (ds.n_times() < 2) throw InsufficientDataError("cross-validation needs at least 2 time steps");
    EvalReport rep;
    rep.kind = kind;
    rep.marginal = cfg.marginal;
    const VineConfig vc = vine_config_for(kind, cfg.vine);
    const DistanceMatrix dm(ds.stations);
    const UniformPanel up = kind == ModelKind::Kriging ? UniformPanel{} : pit_transform(ds, marginals);
    const auto folds = assign_folds(ds.n_stations(), cfg.folds, cfg.seed);
    for (std::size_t k = 0; k < folds.size(); ++k) {
        FoldResult f;
        f.fold = k;
        f.held_out = folds[k];
        for (std::size_t s = 0; s < ds.n_stations(); ++s)
            if (!std::binary_search(f.held_out.begin(), f.held_out.end(), s)) f.training.push_back(s);
        try {
            if (kind == ModelKind::Kriging) {
                detail::kriging_fold(ds, dm, vc, cfg, f, rep.variograms, rep.warnings);
            } else {
                VineConfig fold_cfg = vc;
                fold_cfg.seed = Rng(cfg.seed).split(1000 + k).next_u64();
                detail::vine_fold(ds, up, dm, marginals, fold_cfg, cfg, f, rep.warnings);
            }
        } catch (const Error& e) {
            throw FitError(std::string(model_kind_name(kind)) + " fold " + std::to_string(k + 1) + ": " + e.what());
        }
        if (f.predictions.empty()) {
            f.skipped = true;
            rep.warnings.push_back("fold " + std::to_string(k + 1) + " has no predictable targets; skipped");
        } else {
            detail::finish_fold(f, cfg.extreme_fraction);
        }
        rep.folds.push_back(std::move(f));
    }
    std::size_t used = 0;
    for (const auto& f : rep.folds) {
        if (f.skipped) continue;
        ++used;
        rep.mean_all.mae += f.all.mae;
        rep.mean_all.rmse += f.all.rmse;
        rep.mean_extreme.mae += f.extreme.mae;
        rep.mean_extreme.rmse += f.extreme.rmse;
        rep.mean_coverage_pct += f.coverage.percent;
        rep.total_covered += f.coverage.count;
        rep.total_targets += f.predictions.size();
    }
    if (used) {
        const double u = static_cast<double>(used);
        rep.mean_all.mae /= u;
        rep.mean_all.rmse /= u;
        rep.mean_extreme.mae /= u;
        rep.mean_extreme.rmse /= u;
        rep.mean_coverage_pct /= u;
    }
    return rep;
}

inline EvalReport cross_validate(const PanelDataset& ds, ModelKind kind, const CvConfig& cfg) {
    return cross_validate(ds, fit_marginal_table(ds, cfg.marginal), kind, cfg);
}

// ---------------------------------------------------------------------------
// Report files

inline void write_fold_metrics_csv(std::ostream& os, const std::vector<EvalReport>& reps) {
    os << "model,marginal,fold,mae,rmse,mae_ext,rmse_ext,cov_n,cov_pct\n";
    for (const auto& r : reps)
        for (const auto& f : r.folds) {
            if (f.skipped) continue;
            os << model_kind_name(r.kind) << ',' << marginal_family_name(r.marginal) << ',' << f.fold + 1 << ','
               << detail::format_double(f.all.mae) << ',' << detail::format_double(f.all.rmse) << ','
               << detail::format_double(f.extreme.mae) << ',' << detail::format_double(f.extreme.rmse) << ','
               << f.coverage.count << ',' << detail::format_double(f.coverage.percent) << '\n';
        }
}

inline void write_predictions_csv(std::ostream& os, const EvalReport& r, const PanelDataset& ds) {
    os << "station,time,observed,mean,q025,q975\n";
    for (const auto& f : r.folds)
        for (std::size_t i = 0; i < f.predictions.size(); ++i) {
            const Prediction& p = f.predictions[i];
            os << ds.stations[p.station].id << ',' << ds.times[p.time] << ',' << detail::format_double(f.observed[i])
               << ',' << detail::format_double(p.mean) << ',' << detail::format_double(p.lower) << ','
               << detail::format_double(p.upper) << '\n';
        }
}

inline void write_variogram_csv(std::ostream& os, const std::vector<VariogramRecord>& recs) {
    os << "time,model,nugget,sill,range,sse\n";
    for (const auto& r : recs)
        os << r.time << ',' << variogram_name(r.spec.model) << ',' << detail::format_double(r.spec.nugget) << ','
           << detail::format_double(r.spec.sill) << ',' << detail::format_double(r.spec.range) << ','
           << detail::format_double(r.spec.sse) << '\n';
}

/// Fold-averaged accuracy with the extreme subset in parentheses, then coverage.
inline void write_summary_table(std::ostream& os, const std::vector<EvalReport>& reps) {
    auto pair = [](double a, double b) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << a << " (" << b << ")";
        return s.str();
    };
    os << std::left << std::setw(16) << "model" << std::setw(10) << "marginal" << std::setw(20) << "MAE (extreme)"
       << std::setw(20) << "RMSE (extreme)" << "\n";
    for (const auto& r : reps)
        os << std::setw(16) << model_kind_name(r.kind) << std::setw(10) << marginal_family_name(r.marginal)
           << std::setw(20) << pair(r.mean_all.mae, r.mean_extreme.mae) << std::setw(20)
           << pair(r.mean_all.rmse, r.mean_extreme.rmse) << "\n";
    os << "\n" << std::setw(16) << "model" << std::setw(10) << "marginal" << std::setw(14) << "covered" << "percent\n";
    for (const auto& r : reps) {
        std::ostringstream c;
        c << r.total_covered << "/" << r.total_targets;
        os << std::setw(16) << model_kind_name(r.kind) << std::setw(10) << marginal_family_name(r.marginal)
           << std::setw(14) << c.str() << std::fixed << std::setprecision(2) << r.mean_coverage_pct << "\n";
    }
}

}  // namespace stvine

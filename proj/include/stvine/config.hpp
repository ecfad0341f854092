#pragma once

// Run configuration shared by the command-line tool.

#include <cstdint>
#include <string>
#include <vector>

#include "stvine/cv.hpp"
#include "stvine/panel.hpp"

namespace stvine {

struct RunConfig {
    std::string marginal = "gumbel";
    std::size_t n_bins = 10;
    int degree = 3;
    std::size_t d_spatial = 3;
    std::size_t dc_spatial = 1;
    /// "both", "none" or the name of a single covariate variable.
    std::string covariates = "both";
    bool colocated_covariates = true;
    /// 2 uses lag-0 and lag-1 neighbors; 1 drops the lag-1 half.
    int lags = 2;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    std::size_t quad_nodes = 64;
    std::vector<std::string> models{"vine"};
    std::size_t threads = 1;
    std::size_t min_pairs = 30;

    // ingest
    double max_missing_rate = 0.2;
    double bin_width_km = 50.0;
    bool weekly = true;
    std::size_t week_length = 7;
    bool impute_before_aggregation = true;
};

inline void validate(const RunConfig& c) {
    parse_marginal_family(c.marginal);
    if (c.n_bins == 0 || c.d_spatial == 0 || c.folds < 2 || c.threads == 0 || c.week_length == 0)
        throw DomainError("bins, spatial neighbors, threads and week length must be positive, folds at least 2");
    if (c.lags < 1 || c.lags > kNumLags) throw DomainError("lags must be 1 or 2");
    if (c.degree < 0) throw DomainError("polynomial degree must be non-negative");
    if (c.quad_nodes == 0 || c.quad_nodes % 8 != 0)
        throw DomainError("quadrature nodes must be a positive multiple of 8");
    if (!(c.max_missing_rate >= 0.0 && c.max_missing_rate <= 1.0))
        throw DomainError("missing-rate threshold must lie in [0, 1]");
    if (!(c.bin_width_km > 0.0)) throw DomainError("imputation bin width must be positive");
    if (c.models.empty()) throw DomainError("no model kinds requested");
    for (const auto& m : c.models) parse_model_kind(m);
}

/// Panel variable indices of the configured covariates.
inline std::vector<std::size_t> resolve_covariates(const RunConfig& c, const PanelDataset& ds) {
    if (c.covariates == "none") return {};
    if (c.covariates == "both") {
        std::vector<std::size_t> out;
        for (std::size_t v = 1; v < ds.n_vars() && out.size() < 2; ++v) out.push_back(v);
        return out;
    }
    const std::size_t v = ds.variable_index(c.covariates);
    if (v == 0) throw DomainError("the dependent variable cannot be a covariate");
    return {v};
}

inline VineConfig vine_config(const RunConfig& c, const PanelDataset& ds) {
    VineConfig v;
    v.neighbors.d_spatial = c.d_spatial;
    v.neighbors.dc_spatial = c.dc_spatial;
    v.neighbors.covariates = resolve_covariates(c, ds);
    v.neighbors.colocated_covariates = c.colocated_covariates;
    v.neighbors.lags = c.lags;
    v.n_bins = c.n_bins;
    v.degree = c.degree;
    v.min_pairs = c.min_pairs;
    v.seed = c.seed;
    return v;
}

inline CvConfig cv_config(const RunConfig& c, const PanelDataset& ds) {
    CvConfig cv;
    cv.vine = vine_config(c, ds);
    cv.marginal = parse_marginal_family(c.marginal);
    cv.folds = c.folds;
    cv.seed = c.seed;
    cv.quadrature.panels = c.quad_nodes / 8;
    cv.quadrature.order = 8;
    cv.threads = c.threads;
    return cv;
}

}  // namespace stvine

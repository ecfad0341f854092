#pragma once

// Fill missing panel cells by ordinary kriging within each time slice.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stvine/bins.hpp"
#include "stvine/kriging.hpp"
#include "stvine/panel.hpp"

namespace stvine {

struct ImputeOptions {
    double bin_width_km = 50.0;
    std::uint64_t seed = 0;
    /// Populated bins required before a variogram is fitted; sparser slices
    /// use an exponential variogram with the sample variance as sill.
    std::size_t min_bins = 3;
};

struct ImputedCell {
    std::size_t var, station, time;
    double value;
    VariogramSpec variogram;
};

inline PanelDataset impute_missing(const PanelDataset& ds, const ImputeOptions& opt = {},
                                   std::vector<ImputedCell>* log = nullptr) {
    PanelDataset out = ds;
    const DistanceMatrix dm(ds.stations);
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t t = 0; t < ds.n_times(); ++t) {
            std::vector<std::size_t> obs, miss;
            for (std::size_t s = 0; s < ds.n_stations(); ++s) (std::isnan(ds(v, s, t)) ? miss : obs).push_back(s);
            if (miss.empty()) continue;
            if (obs.size() < 3)
                throw ImputationError("cannot impute " + ds.variables[v] + " at time " + std::to_string(ds.times[t]) +
                                      ": only " + std::to_string(obs.size()) + " observed station(s)");
            const Eigen::Index n = static_cast<Eigen::Index>(obs.size());
            Eigen::MatrixXd D(n, n);
            std::vector<double> vals(obs.size()), dists;
            for (Eigen::Index i = 0; i < n; ++i) {
                vals[static_cast<std::size_t>(i)] = ds(v, obs[static_cast<std::size_t>(i)], t);
                for (Eigen::Index j = 0; j < n; ++j) {
                    D(i, j) = dm(obs[static_cast<std::size_t>(i)], obs[static_cast<std::size_t>(j)]);
                    if (j > i) dists.push_back(D(i, j));
                }
            }
            const BinPartition bins = bins_of_width(dists, opt.bin_width_km);
            const EmpiricalVariogram ev = empirical_variogram(D, vals, bins);
            VariogramSpec vg;
            if (ev.nonempty() >= opt.min_bins) {
                vg = fit_variogram(ev, kImputationVariograms, opt.seed + t, opt.min_bins);
            } else {
                vg = fallback_variogram(vals, dists.empty() ? 0.0 : *std::max_element(dists.begin(), dists.end()));
            }
            const KrigingSystem sys(D, vals, vg);
            for (std::size_t s : miss) {
                Eigen::VectorXd d0(n);
                for (Eigen::Index i = 0; i < n; ++i) d0(i) = dm(obs[static_cast<std::size_t>(i)], s);
                const double x = std::max(0.0, sys.predict(d0).value);
                out(v, s, t) = x;
                if (log) log->push_back({v, s, t, x, vg});
            }
        }
    return out;
}

}  // namespace stvine

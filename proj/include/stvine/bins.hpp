#pragma once

// Distance bins. Bin 0 is [0, e1]; bin b > 0 is (e_b, e_{b+1}].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "stvine/error.hpp"
#include "stvine/geo.hpp"

namespace stvine {

struct BinPartition {
    std::vector<double> edges;   // n_bins + 1 values, edges[0] = 0
    std::vector<double> means;   // mean pair distance per bin (NaN when empty)
    std::vector<std::size_t> counts;

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t n_bins() const { return means.size(); }

    /// Bin holding distance h, or npos when h lies beyond the last edge.
    std::size_t bin_of(double h) const {
        if (h < 0.0 || h > edges.back()) return npos;
        const auto it = std::lower_bound(edges.begin() + 1, edges.end(), h);
        return static_cast<std::size_t>(it - (edges.begin() + 1));
    }
};

/// Equal-width bins over [0, max(d)] with per-bin means of the given distances.
inline BinPartition bins_from_distances(const std::vector<double>& dists, std::size_t n_bins,
                                        bool require_nonempty = true) {
    if (n_bins == 0) throw DomainError("need at least one bin");
    if (dists.empty()) throw InsufficientDataError("no pairwise distances to bin");
    const double hmax = *std::max_element(dists.begin(), dists.end());
    if (!(hmax > 0.0)) throw RebinError("all pairwise distances are zero");
    BinPartition bp;
    bp.edges.resize(n_bins + 1);
    for (std::size_t b = 0; b <= n_bins; ++b) bp.edges[b] = hmax * static_cast<double>(b) / static_cast<double>(n_bins);
    bp.edges.back() = hmax;
    std::vector<double> sum(n_bins, 0.0);
    bp.counts.assign(n_bins, 0);
    for (double h : dists) {
        const std::size_t b = bp.bin_of(h);
        sum[b] += h;
        ++bp.counts[b];
    }
    bp.means.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (bp.counts[b] == 0 && require_nonempty)
            throw RebinError("distance bin " + std::to_string(b + 1) + " of " + std::to_string(n_bins) +
                             " is empty; use fewer bins");
        bp.means[b] = bp.counts[b] ? sum[b] / static_cast<double>(bp.counts[b]) : std::nan("");
    }
    return bp;
}

/// Bins of fixed width starting at 0, enough of them to cover max(d); empty bins allowed.
inline BinPartition bins_of_width(const std::vector<double>& dists, double width) {
    if (!(width > 0.0)) throw DomainError("bin width must be positive");
    const double hmax = dists.empty() ? 0.0 : *std::max_element(dists.begin(), dists.end());
    const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(hmax / width)));
    BinPartition bp;
    for (std::size_t b = 0; b <= n; ++b) bp.edges.push_back(width * static_cast<double>(b));
    bp.edges.back() = std::max(bp.edges.back(), hmax);
    std::vector<double> sum(n, 0.0);
    bp.counts.assign(n, 0);
    for (double h : dists) {
        const std::size_t b = bp.bin_of(h);
        sum[b] += h;
        ++bp.counts[b];
    }
    for (std::size_t b = 0; b < n; ++b)
        bp.means.push_back(bp.counts[b] ? sum[b] / static_cast<double>(bp.counts[b]) : std::nan(""));
    return bp;
}

inline std::vector<double> pairwise_distances(const DistanceMatrix& dm) {
    std::vector<double> out;
    out.reserve(dm.size() * (dm.size() - 1) / 2);
    for (std::size_t i = 0; i < dm.size(); ++i)
        for (std::size_t j = i + 1; j < dm.size(); ++j) out.push_back(dm(i, j));
    return out;
}

/// Equal-width partition of all station-pair distances; every bin must be populated.
inline BinPartition make_bins(const std::vector<Station>& stations, std::size_t n_bins) {
    if (stations.size() < 2) throw InsufficientDataError("binning needs at least two stations");
    return bins_from_distances(pairwise_distances(DistanceMatrix(stations)), n_bins);
}

}  // namespace stvine

#pragma once

// Per-station marginal table and the probability integral transform.

#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "stvine/marginal.hpp"
#include "stvine/panel.hpp"

namespace stvine {

inline constexpr double kPitClip = 1e-10;

struct MarginalEntry {
    MarginalSpec spec;
    KsResult ks;
};

class MarginalTable {
public:
    void set(const std::string& station, const std::string& variable, MarginalEntry e) {
        entries_[{station, variable}] = e;
    }

    const MarginalEntry& at(const std::string& station, const std::string& variable) const {
        const auto it = entries_.find({station, variable});
        if (it == entries_.end())
            throw ReferenceError("no marginal for station '" + station + "', variable '" + variable + "'");
        return it->second;
    }

    bool contains(const std::string& station, const std::string& variable) const {
        return entries_.count({station, variable}) > 0;
    }

    std::size_t size() const { return entries_.size(); }
    const auto& entries() const { return entries_; }

private:
    std::map<std::pair<std::string, std::string>, MarginalEntry> entries_;
};

/// Fit one marginal per station and variable over its observed cells.
inline MarginalTable fit_marginal_table(const PanelDataset& ds, MarginalFamily family) {
    MarginalTable tab;
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t s = 0; s < ds.n_stations(); ++s) {
            std::vector<double> xs;
            for (std::size_t t = 0; t < ds.n_times(); ++t)
                if (!std::isnan(ds(v, s, t))) xs.push_back(ds(v, s, t));
            MarginalEntry e;
            try {
                e.spec = fit_marginal(xs, family);
            } catch (const Error& err) {
                throw FitError("marginal fit for station '" + ds.stations[s].id + "', " + ds.variables[v] + ": " +
                               err.what());
            }
            e.ks = ks_test(xs, e.spec);
            tab.set(ds.stations[s].id, ds.variables[v], e);
        }
    return tab;
}

/// Same layout as PanelDataset with values in (0, 1).
struct UniformPanel : PanelDataset {};

inline double pit_value(const MarginalSpec& m, double x) {
    if (std::isnan(x)) return kNaN;
    return clip_unit(marginal_cdf(m, x), kPitClip);
}

inline UniformPanel pit_transform(const PanelDataset& ds, const MarginalTable& tab) {
    UniformPanel up;
    static_cast<PanelDataset&>(up) = ds;
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t s = 0; s < ds.n_stations(); ++s) {
            const MarginalSpec& m = tab.at(ds.stations[s].id, ds.variables[v]).spec;
            for (std::size_t t = 0; t < ds.n_times(); ++t) up(v, s, t) = pit_value(m, ds(v, s, t));
        }
    return up;
}

inline PanelDataset inverse_pit(const UniformPanel& up, const MarginalTable& tab) {
    PanelDataset ds = up;
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t s = 0; s < ds.n_stations(); ++s) {
            const MarginalSpec& m = tab.at(ds.stations[s].id, ds.variables[v]).spec;
            for (std::size_t t = 0; t < ds.n_times(); ++t)
                if (!std::isnan(up(v, s, t))) ds(v, s, t) = marginal_quantile(m, up(v, s, t));
        }
    return ds;
}

inline void write_marginal_csv(std::ostream& os, const MarginalTable& tab) {
    os << "station_id,variable,family,a,b,s,ks_stat,ks_p\n";
    for (const auto& [key, e] : tab.entries()) {
        os << key.first << ',' << key.second << ',' << marginal_family_name(e.spec.family) << ','
           << detail::format_double(e.spec.a) << ',' << detail::format_double(e.spec.b) << ',';
        if (e.spec.family == MarginalFamily::GEV) os << detail::format_double(e.spec.s);
        os << ',' << detail::format_double(e.ks.statistic) << ',' << detail::format_double(e.ks.p_value) << '\n';
    }
}

}  // namespace stvine

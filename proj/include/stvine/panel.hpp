#pragma once

// Station panels: loading, missingness, station filtering and weekly
// aggregation. Missing cells are NaN.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stvine/error.hpp"
#include "stvine/geo.hpp"
#include "stvine/numeric.hpp"

namespace stvine {

/// values(var, station, t) with var 0 the dependent variable and 1, 2 the covariates.
struct PanelDataset {
    std::vector<Station> stations;
    std::vector<int> times;
    std::vector<std::string> variables;
    std::vector<double> data;

    std::size_t n_vars() const { return variables.size(); }
    std::size_t n_stations() const { return stations.size(); }
    std::size_t n_times() const { return times.size(); }

    double& operator()(std::size_t v, std::size_t s, std::size_t t) {
        return data[(v * stations.size() + s) * times.size() + t];
    }
    double operator()(std::size_t v, std::size_t s, std::size_t t) const {
        return data[(v * stations.size() + s) * times.size() + t];
    }

    void resize() { data.assign(n_vars() * n_stations() * n_times(), kNaN); }

    std::size_t station_index(std::string_view id) const {
        for (std::size_t i = 0; i < stations.size(); ++i)
            if (stations[i].id == id) return i;
        throw ReferenceError("unknown station '" + std::string(id) + "'");
    }

    std::size_t variable_index(std::string_view name) const {
        for (std::size_t i = 0; i < variables.size(); ++i)
            if (variables[i] == name) return i;
        throw ReferenceError("unknown variable '" + std::string(name) + "'");
    }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](double x) { return std::isnan(x); }));
    }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t p = line.find(',', start);
        std::string_view f = line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start);
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
        out.push_back(f);
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line, std::string_view what) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw ParseError("cannot parse " + std::string(what) + " '" + std::string(s) + "'", line);
    return v;
}

inline long parse_int(std::string_view s, std::size_t line, std::string_view what) {
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw ParseError("cannot parse " + std::string(what) + " '" + std::string(s) + "'", line);
    return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    return lines;
}

inline bool blank(std::string_view l) {
    return l.find_first_not_of(" \t\r") == std::string_view::npos;
}

inline std::string format_double(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

}  // namespace detail

inline std::vector<Station> parse_stations(const std::string& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty()) throw SchemaError("'" + path + "' is empty");
    const auto head = detail::split_csv(lines[0]);
    if (head.size() != 3 || head[0] != "station_id" || head[1] != "lon" || head[2] != "lat")
        throw SchemaError("'" + path + "': expected header station_id,lon,lat");
    std::vector<Station> out;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::blank(lines[i])) continue;
        const std::size_t ln = i + 1;
        const auto f = detail::split_csv(lines[i]);
        if (f.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(f.size()), ln);
        if (f[0].empty()) throw ParseError("empty station_id", ln);
        Station s{std::string(f[0]), detail::parse_double(f[1], ln, "lon"), detail::parse_double(f[2], ln, "lat")};
        if (!(s.lon >= -180.0 && s.lon <= 180.0)) throw ParseError("lon out of [-180, 180]", ln);
        if (!(s.lat >= -90.0 && s.lat <= 90.0)) throw ParseError("lat out of [-90, 90]", ln);
        if (auto it = seen.find(s.id); it != seen.end())
            throw SchemaError("duplicate station '" + s.id + "' on lines " + std::to_string(it->second) + " and " +
                              std::to_string(ln));
        seen.emplace(s.id, ln);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw SchemaError("'" + path + "' lists no stations");
    return out;
}

/// Load a panel from the stations and observations CSV files. The time axis
/// is 1..max(time); cells without a row, and empty fields, are missing.
inline PanelDataset load_panel(const std::string& stations_file, const std::string& observations_file) {
    PanelDataset ds;
    ds.stations = parse_stations(stations_file);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.stations.size(); ++i) index.emplace(ds.stations[i].id, i);

    const auto lines = detail::read_lines(observations_file);
    if (lines.empty()) throw SchemaError("'" + observations_file + "' is empty");
    const auto head = detail::split_csv(lines[0]);
    if (head.size() < 3 || head.size() > 5 || head[0] != "station_id" || head[1] != "time")
        throw SchemaError("'" + observations_file +
                          "': expected header station_id,time,<dependent>[,<covariate>[,<covariate>]]");
    for (std::size_t k = 2; k < head.size(); ++k) {
        if (head[k].empty()) throw SchemaError("empty variable name in header");
        ds.variables.emplace_back(head[k]);
    }

    struct Row {
        std::size_t station;
        long time;
        std::vector<double> vals;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::map<std::pair<std::size_t, long>, std::size_t> where;
    std::vector<long> last_time(ds.stations.size(), 0);
    long tmax = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (detail::blank(lines[i])) continue;
        const std::size_t ln = i + 1;
        const auto f = detail::split_csv(lines[i]);
        if (f.size() != head.size())
            throw ParseError("expected " + std::to_string(head.size()) + " fields, got " + std::to_string(f.size()), ln);
        const auto it = index.find(std::string(f[0]));
        if (it == index.end())
            throw ReferenceError("observation on line " + std::to_string(ln) + " references unknown station '" +
                                 std::string(f[0]) + "'");
        const long t = detail::parse_int(f[1], ln, "time");
        if (t < 1) throw ParseError("time must be a 1-based index", ln);
        Row r{it->second, t, {}, ln};
        for (std::size_t k = 2; k < f.size(); ++k) {
            if (f[k].empty()) {
                r.vals.push_back(kNaN);
                continue;
            }
            const double v = detail::parse_double(f[k], ln, ds.variables[k - 2]);
            if (!std::isfinite(v) || v < 0.0)
                throw ParseError(ds.variables[k - 2] + " must be finite and non-negative", ln);
            r.vals.push_back(v);
        }
        if (auto [pos, fresh] = where.emplace(std::make_pair(r.station, t), ln); !fresh)
            throw SchemaError("duplicate observation for station '" + ds.stations[r.station].id + "' at time " +
                              std::to_string(t) + " on lines " + std::to_string(pos->second) + " and " +
                              std::to_string(ln));
        if (t < last_time[r.station])
            throw SchemaError("time column is not increasing for station '" + ds.stations[r.station].id +
                              "' (line " + std::to_string(ln) + ")");
        last_time[r.station] = t;
        tmax = std::max(tmax, t);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw SchemaError("'" + observations_file + "' has no observations");
    for (long t = 1; t <= tmax; ++t) ds.times.push_back(static_cast<int>(t));
    ds.resize();
    for (const auto& r : rows)
        for (std::size_t v = 0; v < r.vals.size(); ++v) ds(v, r.station, static_cast<std::size_t>(r.time - 1)) = r.vals[v];
    return ds;
}

inline void write_stations_csv(std::ostream& os, const std::vector<Station>& st) {
    os << "station_id,lon,lat\n";
    for (const auto& s : st) os << s.id << ',' << detail::format_double(s.lon) << ',' << detail::format_double(s.lat) << '\n';
}

inline void write_observations_csv(std::ostream& os, const PanelDataset& ds) {
    os << "station_id,time";
    for (const auto& v : ds.variables) os << ',' << v;
    os << '\n';
    for (std::size_t s = 0; s < ds.n_stations(); ++s)
        for (std::size_t t = 0; t < ds.n_times(); ++t) {
            os << ds.stations[s].id << ',' << ds.times[t];
            for (std::size_t v = 0; v < ds.n_vars(); ++v) {
                os << ',';
                if (!std::isnan(ds(v, s, t))) os << detail::format_double(ds(v, s, t));
            }
            os << '\n';
        }
}

// ---------------------------------------------------------------------------
// Missingness and filtering

struct MissingnessEntry {
    std::string station;
    std::string variable;
    std::size_t missing_count = 0;
    double missing_rate = 0.0;
};

using MissingnessReport = std::vector<MissingnessEntry>;

inline MissingnessReport missingness_report(const PanelDataset& ds) {
    MissingnessReport out;
    for (std::size_t s = 0; s < ds.n_stations(); ++s)
        for (std::size_t v = 0; v < ds.n_vars(); ++v) {
            std::size_t n = 0;
            for (std::size_t t = 0; t < ds.n_times(); ++t) n += std::isnan(ds(v, s, t)) ? 1 : 0;
            out.push_back({ds.stations[s].id, ds.variables[v], n,
                           ds.n_times() ? static_cast<double>(n) / static_cast<double>(ds.n_times()) : 0.0});
        }
    return out;
}

inline void write_missingness_csv(std::ostream& os, const MissingnessReport& r) {
    os << "station_id,variable,missing_count,missing_rate\n";
    for (const auto& e : r)
        os << e.station << ',' << e.variable << ',' << e.missing_count << ',' << detail::format_double(e.missing_rate)
           << '\n';
}

/// Keep the stations listed by index, in the given order.
inline PanelDataset select_stations(const PanelDataset& ds, const std::vector<std::size_t>& keep) {
    PanelDataset out;
    out.times = ds.times;
    out.variables = ds.variables;
    for (std::size_t s : keep) out.stations.push_back(ds.stations.at(s));
    out.resize();
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t k = 0; k < keep.size(); ++k)
            for (std::size_t t = 0; t < ds.n_times(); ++t) out(v, k, t) = ds(v, keep[k], t);
    return out;
}

/// Keep the stations whose missing rate is strictly below the threshold for
/// every variable (a threshold of 1 keeps everything).
inline PanelDataset filter_stations(const PanelDataset& ds, double max_missing_rate) {
    if (!(max_missing_rate >= 0.0 && max_missing_rate <= 1.0))
        throw DomainError("max_missing_rate must lie in [0, 1]");
    std::vector<std::size_t> keep;
    const double T = static_cast<double>(ds.n_times());
    for (std::size_t s = 0; s < ds.n_stations(); ++s) {
        bool ok = true;
        for (std::size_t v = 0; v < ds.n_vars() && ok; ++v) {
            std::size_t n = 0;
            for (std::size_t t = 0; t < ds.n_times(); ++t) n += std::isnan(ds(v, s, t)) ? 1 : 0;
            ok = max_missing_rate >= 1.0 || static_cast<double>(n) / T < max_missing_rate;
        }
        if (ok) keep.push_back(s);
    }
    if (keep.size() < 2)
        throw InsufficientDataError("station filter at missing rate " + detail::format_double(max_missing_rate) +
                                    " leaves " + std::to_string(keep.size()) + " station(s)");
    return select_stations(ds, keep);
}

/// Means over consecutive blocks of `week` steps; a block with any missing day is missing.
inline PanelDataset aggregate_to_weekly(const PanelDataset& daily, std::size_t week = 7) {
    if (week == 0 || daily.n_times() % week != 0)
        throw ShapeError("time axis of length " + std::to_string(daily.n_times()) + " is not a multiple of " +
                         std::to_string(week));
    PanelDataset out;
    out.stations = daily.stations;
    out.variables = daily.variables;
    const std::size_t W = daily.n_times() / week;
    for (std::size_t w = 0; w < W; ++w) out.times.push_back(static_cast<int>(w + 1));
    out.resize();
    for (std::size_t v = 0; v < daily.n_vars(); ++v)
        for (std::size_t s = 0; s < daily.n_stations(); ++s)
            for (std::size_t w = 0; w < W; ++w) {
                double sum = 0.0;
                for (std::size_t k = 0; k < week; ++k) sum += daily(v, s, w * week + k);
                out(v, s, w) = sum / static_cast<double>(week);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Summary statistics

struct SummaryStats {
    std::size_t n = 0;
    double mean = kNaN, sd = kNaN, min = kNaN, median = kNaN, max = kNaN;
};

/// Statistics over all observed cells of one variable; SD uses n - 1.
inline SummaryStats summarize(const PanelDataset& ds, std::size_t var) {
    std::vector<double> xs;
    for (std::size_t s = 0; s < ds.n_stations(); ++s)
        for (std::size_t t = 0; t < ds.n_times(); ++t)
            if (!std::isnan(ds(var, s, t))) xs.push_back(ds(var, s, t));
    SummaryStats r;
    r.n = xs.size();
    if (xs.empty()) return r;
    std::sort(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    r.min = xs.front();
    r.max = xs.back();
    const std::size_t m = xs.size() / 2;
    r.median = xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
    return r;
}

}  // namespace stvine

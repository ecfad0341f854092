// stvine: ingest, fit, predict, cross-validate and report from the command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "stvine/config.hpp"
#include "stvine/cv.hpp"
#include "stvine/impute.hpp"
#include "stvine/model_io.hpp"
#include "stvine/panel.hpp"
#include "stvine/pit.hpp"
#include "stvine/predict.hpp"
#include "stvine/synthetic.hpp"
#include "stvine/vine.hpp"

namespace fs = std::filesystem;
using namespace stvine;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSchema = 2, kImpute = 3, kFit = 4, kCv = 5, kReport = 6 };

class IoError : public Error {
    using Error::Error;
};

// Write through a temporary sibling and rename, so readers never see a partial file.
void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write '" + tmp.string() + "'");
        fill(os);
        os.flush();
        if (!os) throw IoError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

int fail(int code, const std::string& what) {
    std::cerr << "stvine: " << what << '\n';
    return code;
}

PanelDataset load_dataset(const fs::path& dir) {
    return load_panel((dir / "stations.csv").string(), (dir / "observations.csv").string());
}

PanelDataset load_complete(const fs::path& dir) {
    PanelDataset ds = load_dataset(dir);
    if (ds.missing_count() > 0)
        throw SchemaError("dataset in '" + dir.string() + "' has " + std::to_string(ds.missing_count()) +
                          " missing cell(s); run ingest first");
    return ds;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string fixed(double x, int digits = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
}

std::string spec_label(const BivariateCopulaSpec& s) {
    std::string out(family_name(s.family));
    if (s.rotation != 0) out += " " + std::to_string(s.rotation);
    if (s.family == Family::StudentT) out += " df=" + detail::format_double(s.df);
    return out;
}

// Structures of a fitted model with the names used in reports.
std::vector<std::pair<std::string, const StCopula*>> structures(const VineModel& m,
                                                               const std::vector<std::string>& vars) {
    std::vector<std::pair<std::string, const StCopula*>> out{{"dependent", &m.dependent}};
    for (std::size_t c = 0; c < m.covariate.size(); ++c) out.emplace_back(vars.at(m.neighbors.covariates[c]), &m.covariate[c]);
    return out;
}

// Family per bin and lag with the tau the polynomial assigns at the bin mean.
void print_family_table(std::ostream& os, const std::string& name, const StCopula& st) {
    os << name << " (tau polynomial degree " << st.poly.degree << ")\n";
    os << std::left << std::setw(5) << "bin" << std::setw(22) << "distance km";
    for (int lag = 0; lag < kNumLags; ++lag) os << std::setw(28) << ("lag " + std::to_string(lag));
    os << '\n';
    for (std::size_t b = 0; b < st.bins.n_bins(); ++b) {
        os << std::setw(5) << b + 1
           << std::setw(22) << ("(" + fixed(st.bins.edges[b], 1) + ", " + fixed(st.bins.edges[b + 1], 1) + "]");
        for (int lag = 0; lag < kNumLags; ++lag) {
            const auto& p = st.protos[static_cast<std::size_t>(lag)][b];
            os << std::setw(28) << (spec_label(p) + "  tau " + fixed(st.poly(st.bins.means[b], lag), 2));
        }
        os << '\n';
    }
    os << '\n';
}

// ---------------------------------------------------------------------------
// SVG correlogram: fitted tau(h) per lag with the empirical bin values.

void write_correlogram_svg(std::ostream& os, const std::string& title, const StCopula& st) {
    const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    const double hmax = st.poly.h_max > 0 ? st.poly.h_max : 1.0;
    double ymin = -0.1;
    for (int lag = 0; lag < kNumLags; ++lag)
        for (std::size_t b = 0; b < st.bins.n_bins(); ++b) {
            const double r = st.poly.residuals[static_cast<std::size_t>(lag)][b];
            if (std::isfinite(r)) ymin = std::min(ymin, st.poly.raw(st.bins.means[b], lag) + r);
        }
    ymin = std::floor(ymin * 10) / 10;
    const double ymax = 1.0;
    auto X = [&](double h) { return L + (W - L - R) * h / hmax; };
    auto Y = [&](double tau) { return T + (H - T - B) * (ymax - tau) / (ymax - ymin); };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<g stroke=\"#888\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << Y(0) << "\" x2=\"" << W - R << "\" y2=\"" << Y(0)
       << "\" stroke-dasharray=\"2 3\"/>\n</g>\n";
    for (int k = 0; k <= 5; ++k) {
        const double h = hmax * k / 5;
        os << "<text x=\"" << X(h) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << fixed(h, 0)
           << "</text>\n";
    }
    for (double tau = std::ceil(ymin * 4) / 4; tau <= ymax + 1e-9; tau += 0.25)
        os << "<text x=\"" << L - 8 << "\" y=\"" << Y(tau) + 4 << "\" text-anchor=\"end\">" << fixed(tau, 2)
           << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">distance (km)</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\">Kendall's tau</text>\n";
    const char* colour[kNumLags] = {"#1f4e9c", "#b03a2e"};
    for (int lag = 0; lag < kNumLags; ++lag) {
        os << "<polyline class=\"lag" << lag << "\" fill=\"none\" stroke=\"" << colour[lag] << "\" stroke-width=\"2\"";
        if (lag == 1) os << " stroke-dasharray=\"8 5\"";
        os << " points=\"";
        for (int i = 0; i <= 100; ++i) {
            const double h = hmax * i / 100;
            os << fixed(X(h), 2) << ',' << fixed(Y(st.poly(h, lag)), 2) << ' ';
        }
        os << "\"/>\n";
        for (std::size_t b = 0; b < st.bins.n_bins(); ++b) {
            const double r = st.poly.residuals[static_cast<std::size_t>(lag)][b];
            if (!std::isfinite(r)) continue;
            const double tau = st.poly.raw(st.bins.means[b], lag) + r;
            os << "<circle cx=\"" << fixed(X(st.bins.means[b]), 2) << "\" cy=\"" << fixed(Y(tau), 2)
               << "\" r=\"3.5\" stroke=\"" << colour[lag] << "\" fill=\"" << (lag == 0 ? colour[lag] : "white")
               << "\"/>\n";
        }
    }
    const double lx = W - R - 150, ly = T + 10;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 30 << "\" y2=\"" << ly << "\" stroke=\""
       << colour[0] << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << lx + 36 << "\" y=\"" << ly + 4 << "\">same time</text>\n";
    os << "<line x1=\"" << lx << "\" y1=\"" << ly + 18 << "\" x2=\"" << lx + 30 << "\" y2=\"" << ly + 18
       << "\" stroke=\"" << colour[1] << "\" stroke-width=\"2\" stroke-dasharray=\"8 5\"/>\n";
    os << "<text x=\"" << lx + 36 << "\" y=\"" << ly + 22 << "\">one step apart</text>\n";
    os << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Commands

struct Paths {
    std::string stations, observations, data, out, model, cv_dir;
    std::string model_kind = "vine";
    std::string models = "vine";
    std::vector<std::string> target_stations;
    std::vector<int> target_times;
    std::vector<double> levels;
    std::size_t sim_stations = 30, sim_times = 60;
    double sim_missing = 0.0;
};

int cmd_ingest(const RunConfig& c, const Paths& p) {
    PanelDataset raw;
    try {
        raw = load_panel(p.stations, p.observations);
    } catch (const Error& e) {
        return fail(kSchema, e.what());
    }
    const fs::path out(p.out);
    PanelDataset ds;
    std::vector<ImputedCell> log;
    try {
        const PanelDataset kept = filter_stations(raw, c.max_missing_rate);
        ImputeOptions io;
        io.bin_width_km = c.bin_width_km;
        io.seed = c.seed;
        if (!c.weekly)
            ds = impute_missing(kept, io, &log);
        else if (c.impute_before_aggregation)
            ds = aggregate_to_weekly(impute_missing(kept, io, &log), c.week_length);
        else
            ds = impute_missing(aggregate_to_weekly(kept, c.week_length), io, &log);
    } catch (const ShapeError& e) {
        return fail(kSchema, e.what());
    } catch (const Error& e) {
        return fail(kImpute, e.what());
    }
    write_atomic(out / "missingness.csv", [&](std::ostream& os) { write_missingness_csv(os, missingness_report(raw)); });
    write_atomic(out / "imputed.csv", [&](std::ostream& os) {
        os << "variable,station_id,time,value,variogram,nugget,sill,range\n";
        for (const auto& cell : log)
            os << raw.variables[cell.var] << ',' << raw.stations[cell.station].id << ',' << raw.times[cell.time] << ','
               << detail::format_double(cell.value) << ',' << variogram_name(cell.variogram.model) << ','
               << detail::format_double(cell.variogram.nugget) << ',' << detail::format_double(cell.variogram.sill)
               << ',' << detail::format_double(cell.variogram.range) << '\n';
    });
    write_atomic(out / "stations.csv", [&](std::ostream& os) { write_stations_csv(os, ds.stations); });
    write_atomic(out / "observations.csv", [&](std::ostream& os) { write_observations_csv(os, ds); });
    std::cout << "kept " << ds.n_stations() << " of " << raw.n_stations() << " stations, " << ds.n_times()
              << " time steps, " << log.size() << " imputed cell(s)\n";
    for (std::size_t v = 0; v < ds.n_vars(); ++v) {
        const SummaryStats s = summarize(ds, v);
        std::cout << std::left << std::setw(8) << ds.variables[v] << " mean " << fixed(s.mean, 2) << "  sd "
                  << fixed(s.sd, 2) << "  min " << fixed(s.min, 2) << "  median " << fixed(s.median, 2) << "  max "
                  << fixed(s.max, 2) << '\n';
    }
    return kOk;
}

int cmd_fit(RunConfig c, const Paths& p) {
    PanelDataset ds;
    ModelKind kind;
    VineConfig vc;
    try {
        ds = load_complete(p.data);
        kind = parse_model_kind(p.model_kind);
        vc = vine_config_for(kind, vine_config(c, ds));
    } catch (const Error& e) {
        return fail(kSchema, e.what());
    }
    ModelBundle mb;
    mb.kind = kind;
    mb.marginal = parse_marginal_family(c.marginal);
    mb.variables = ds.variables;
    for (const auto& s : ds.stations) mb.training_stations.push_back(s.id);
    try {
        mb.marginals = fit_marginal_table(ds, mb.marginal);
        mb.model.neighbors = vc.neighbors;
        if (kind != ModelKind::Kriging) {
            std::vector<std::size_t> all(ds.n_stations());
            for (std::size_t s = 0; s < all.size(); ++s) all[s] = s;
            const VineFit fit = fit_vine(pit_transform(ds, mb.marginals), DistanceMatrix(ds.stations), all, vc);
            mb.model = fit.model;
            for (const auto& w : fit.model.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << model_kind_name(kind) << ": " << mb.model.dimension() << " tree-1 edges, "
                      << mb.model.upper.size() << " upper-tree copulas, log-likelihood "
                      << fixed(fit.log_lik, 2) << "\n\n";
            for (const auto& [name, st] : structures(mb.model, ds.variables)) print_family_table(std::cout, name, *st);
        }
    } catch (const Error& e) {
        return fail(kFit, e.what());
    }
    write_atomic(p.out, [&](std::ostream& os) { save_model(os, mb); });
    return kOk;
}

int cmd_predict(const RunConfig& c, const Paths& p) {
    PanelDataset ds;
    ModelBundle mb;
    try {
        ds = load_complete(p.data);
        std::ifstream in(p.model);
        if (!in) throw SchemaError("cannot open '" + p.model + "'");
        mb = load_model(in);
        if (mb.variables != ds.variables) throw SchemaError("model and dataset variables differ");
    } catch (const Error& e) {
        return fail(kSchema, e.what());
    }
    PredictOptions po;
    po.quadrature.panels = c.quad_nodes / 8;
    po.levels = p.levels;
    std::vector<Prediction> preds;
    try {
        std::vector<std::size_t> training;
        for (const auto& id : mb.training_stations) training.push_back(ds.station_index(id));
        std::vector<std::size_t> targets;
        if (p.target_stations.empty())
            for (std::size_t s = 0; s < ds.n_stations(); ++s) targets.push_back(s);
        for (const auto& id : p.target_stations) targets.push_back(ds.station_index(id));
        std::vector<std::size_t> times;
        if (p.target_times.empty())
            for (std::size_t t = mb.model.neighbors.first_time(); t < ds.n_times(); ++t) times.push_back(t);
        for (int t : p.target_times) {
            if (t < 1 || static_cast<std::size_t>(t) > ds.n_times())
                throw DomainError("time " + std::to_string(t) + " is outside 1.." + std::to_string(ds.n_times()));
            times.push_back(static_cast<std::size_t>(t - 1));
        }
        const DistanceMatrix dm(ds.stations);
        const UniformPanel up = mb.kind == ModelKind::Kriging ? UniformPanel{} : pit_transform(ds, mb.marginals);
        VineConfig vc;
        vc.neighbors = mb.model.neighbors;
        vc.n_bins = c.n_bins;
        for (std::size_t s : targets) {
            std::vector<std::size_t> others;
            for (std::size_t o : training)
                if (o != s) others.push_back(o);
            for (std::size_t t : times) {
                if (mb.kind == ModelKind::Kriging) {
                    if (t < vc.neighbors.first_time())
                        throw BoundaryError("time " + std::to_string(ds.times[t]) + " has no lag-1 predecessor");
                    preds.push_back(krige_slice(ds, dm, others, {s}, t, vc, c.seed + t).predictions.front());
                } else {
                    const NeighborSet ns = build_neighborhood(up, dm, s, t, others, mb.model.neighbors);
                    preds.push_back(predict(mb.model, ns, mb.marginals.at(ds.stations[s].id, ds.variables[0]).spec, po));
                }
            }
        }
    } catch (const Error& e) {
        return fail(kFit, e.what());
    }
    auto emit = [&](std::ostream& os) {
        os << "station,time,observed,mean,q025,q975";
        for (double lv : p.levels) os << ",q" << detail::format_double(lv);
        os << '\n';
        for (const auto& pr : preds) {
            os << ds.stations[pr.station].id << ',' << ds.times[pr.time] << ','
               << detail::format_double(ds(0, pr.station, pr.time)) << ',' << detail::format_double(pr.mean) << ','
               << detail::format_double(pr.lower) << ',' << detail::format_double(pr.upper);
            for (const auto& q : pr.quantiles) os << ',' << detail::format_double(q.second);
            os << '\n';
        }
    };
    if (p.out.empty())
        emit(std::cout);
    else
        write_atomic(p.out, emit);
    return kOk;
}

void write_families_csv(std::ostream& os, const std::vector<EvalReport>& reps, const std::vector<std::string>& vars) {
    os << "model,fold,structure,lag,bin,family,rotation\n";
    for (const auto& r : reps)
        for (const auto& f : r.folds) {
            if (r.kind == ModelKind::Kriging || f.model.dependent.bins.n_bins() == 0) continue;
            for (const auto& [name, st] : structures(f.model, vars))
                for (int lag = 0; lag < kNumLags; ++lag)
                    for (std::size_t b = 0; b < st->bins.n_bins(); ++b) {
                        const auto& s = st->protos[static_cast<std::size_t>(lag)][b];
                        os << model_kind_name(r.kind) << ',' << f.fold + 1 << ',' << name << ',' << lag << ',' << b + 1
                           << ',' << family_name(s.family) << ',' << s.rotation << '\n';
                    }
        }
}

int cmd_cv(const RunConfig& c, const Paths& p) {
    PanelDataset ds;
    CvConfig cfg;
    std::vector<ModelKind> kinds;
    try {
        ds = load_complete(p.data);
        cfg = cv_config(c, ds);
        for (const auto& m : split(p.models, ',')) kinds.push_back(parse_model_kind(m));
        if (kinds.empty()) throw DomainError("no model kinds requested");
    } catch (const Error& e) {
        return fail(kSchema, e.what());
    }
    std::vector<EvalReport> reps;
    try {
        const MarginalTable marginals = fit_marginal_table(ds, cfg.marginal);
        for (ModelKind k : kinds) {
            reps.push_back(cross_validate(ds, marginals, k, cfg));
            for (const auto& w : reps.back().warnings) std::cerr << "warning: " << model_kind_name(k) << ' ' << w << '\n';
        }
    } catch (const Error& e) {
        return fail(kCv, e.what());
    }
    const fs::path out(p.out);
    write_atomic(out / "fold_metrics.csv", [&](std::ostream& os) { write_fold_metrics_csv(os, reps); });
    for (const auto& r : reps)
        write_atomic(out / ("predictions_" + std::string(model_kind_name(r.kind)) + ".csv"),
                     [&](std::ostream& os) { write_predictions_csv(os, r, ds); });
    for (const auto& r : reps)
        if (r.kind == ModelKind::Kriging)
            write_atomic(out / "variograms.csv", [&](std::ostream& os) { write_variogram_csv(os, r.variograms); });
    write_atomic(out / "families.csv", [&](std::ostream& os) { write_families_csv(os, reps, ds.variables); });
    write_atomic(out / "summary.txt", [&](std::ostream& os) { write_summary_table(os, reps); });
    write_summary_table(std::cout, reps);
    return kOk;
}

// CSV rows below the header as field lists.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != header) throw SchemaError("'" + path.string() + "' has an unexpected header");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        for (auto sv : detail::split_csv(line)) f.emplace_back(sv);
        rows.push_back(std::move(f));
    }
    return rows;
}

int cmd_report(const Paths& p) {
    const fs::path out(p.out);
    std::size_t written = 0;
    try {
        if (!p.model.empty()) {
            std::ifstream in(p.model);
            if (!in) throw IoError("cannot open model '" + p.model + "'");
            const ModelBundle mb = load_model(in);
            if (mb.kind == ModelKind::Kriging) throw SchemaError("a kriging model has no correlograms to report");
            const auto sts = structures(mb.model, mb.variables);
            for (const auto& [name, st] : sts) {
                write_atomic(out / ("correlogram_" + name + ".svg"), [&](std::ostream& os) {
                    write_correlogram_svg(os, "Kendall's tau vs distance: " + name, *st);
                });
                ++written;
            }
            write_atomic(out / "family_table.csv", [&](std::ostream& os) {
                os << "structure,lag,bin,lower_km,upper_km,mean_km,family,rotation,df,tau\n";
                for (const auto& [name, st] : sts)
                    for (int lag = 0; lag < kNumLags; ++lag)
                        for (std::size_t b = 0; b < st->bins.n_bins(); ++b) {
                            const auto& s = st->protos[static_cast<std::size_t>(lag)][b];
                            os << name << ',' << lag << ',' << b + 1 << ',' << detail::format_double(st->bins.edges[b])
                               << ',' << detail::format_double(st->bins.edges[b + 1]) << ','
                               << detail::format_double(st->bins.means[b]) << ',' << family_name(s.family) << ','
                               << s.rotation << ',' << detail::format_double(s.df) << ','
                               << detail::format_double(st->poly(st->bins.means[b], lag)) << '\n';
                        }
            });
            ++written;
        }
        if (!p.cv_dir.empty()) {
            const fs::path dir(p.cv_dir);
            if (!fs::is_directory(dir)) throw IoError("'" + p.cv_dir + "' is not a directory");
            if (fs::exists(dir / "families.csv")) {
                // (model, structure, lag, bin) -> family -> folds selecting it
                std::map<std::tuple<std::string, std::string, int, int>, std::map<std::string, int>> freq;
                for (const auto& r : read_csv(dir / "families.csv", "model,fold,structure,lag,bin,family,rotation")) {
                    if (r.size() != 7) throw SchemaError("families.csv: malformed row");
                    std::string fam = r[5];
                    if (r[6] != "0") fam += " " + r[6];
                    ++freq[{r[0], r[2], std::stoi(r[3]), std::stoi(r[4])}][fam];
                }
                if (!freq.empty()) {
                    write_atomic(out / "family_frequency.csv", [&](std::ostream& os) {
                        os << "model,structure,lag,bin,families\n";
                        for (const auto& [key, counts] : freq) {
                            std::vector<std::pair<std::string, int>> v(counts.begin(), counts.end());
                            std::stable_sort(v.begin(), v.end(),
                                             [](const auto& a, const auto& b) { return a.second > b.second; });
                            os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
                               << std::get<3>(key) << ',';
                            for (std::size_t i = 0; i < v.size(); ++i)
                                os << (i ? ";" : "") << v[i].first << ':' << v[i].second;
                            os << '\n';
                        }
                    });
                    ++written;
                }
            }
            std::vector<std::tuple<std::string, std::size_t, std::size_t>> cover;
            for (const auto& entry : fs::directory_iterator(dir)) {
                const std::string name = entry.path().filename().string();
                if (!name.starts_with("predictions_") || entry.path().extension() != ".csv") continue;
                std::size_t n = 0, in = 0;
                for (const auto& r : read_csv(entry.path(), "station,time,observed,mean,q025,q975")) {
                    if (r.size() != 6) throw SchemaError(name + ": malformed row");
                    const double o = std::stod(r[2]);
                    ++n;
                    in += std::stod(r[4]) <= o && o <= std::stod(r[5]);
                }
                cover.emplace_back(name.substr(12, name.size() - 16), in, n);
            }
            std::sort(cover.begin(), cover.end());
            if (!cover.empty()) {
                write_atomic(out / "coverage.csv", [&](std::ostream& os) {
                    os << "model,covered,targets,percent\n";
                    for (const auto& [m, in, n] : cover)
                        os << m << ',' << in << ',' << n << ','
                           << detail::format_double(n ? 100.0 * static_cast<double>(in) / static_cast<double>(n) : 0.0)
                           << '\n';
                });
                ++written;
            }
        }
    } catch (const std::exception& e) {
        return fail(kReport, e.what());
    }
    if (written == 0) return fail(kReport, "nothing to report: give --model and/or a --cv-dir holding cv output");
    std::cout << "wrote " << written << " report file(s) to " << out.string() << '\n';
    return kOk;
}

int cmd_simulate(const RunConfig& c, const Paths& p) {
    SyntheticOptions o;
    o.stations = p.sim_stations;
    o.times = p.sim_times;
    o.seed = c.seed;
    PanelDataset ds;
    try {
        ds = simulate_panel(o);
        if (!(p.sim_missing >= 0.0 && p.sim_missing < 1.0)) throw DomainError("missing fraction must lie in [0, 1)");
        Rng rng(Rng(c.seed).split(7).next_u64());
        for (double& x : ds.data)
            if (rng.uniform() < p.sim_missing) x = kNaN;
    } catch (const Error& e) {
        return fail(kSchema, e.what());
    }
    const fs::path out(p.out);
    write_atomic(out / "stations.csv", [&](std::ostream& os) { write_stations_csv(os, ds.stations); });
    write_atomic(out / "observations.csv", [&](std::ostream& os) { write_observations_csv(os, ds); });
    std::cout << "simulated " << ds.n_stations() << " stations x " << ds.n_times() << " times\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal vine copula prediction of air-pollution panels"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key=value file; command-line flags take precedence");
    app.set_version_flag("--version", "stvine 1.0");

    RunConfig c;
    std::vector<std::string> models;
    app.add_option("--marginal", c.marginal, "Marginal family: gumbel or gev")->capture_default_str();
    app.add_option("--bins", c.n_bins, "Distance bins for the correlogram")->capture_default_str();
    app.add_option("--degree", c.degree, "Degree of the tau polynomial")->capture_default_str();
    app.add_option("--d-spatial", c.d_spatial, "Nearest dependent-variable neighbors")->capture_default_str();
    app.add_option("--dc-spatial", c.dc_spatial, "Nearest neighbors per covariate")->capture_default_str();
    app.add_option("--covariates", c.covariates, "both, none, or one covariate variable name")->capture_default_str();
    app.add_flag("!--no-colocated", c.colocated_covariates, "Leave out covariates measured at the target itself");
    app.add_option("--lags", c.lags, "1: same-time neighbors only; 2: also one step back")->capture_default_str();
    app.add_option("--folds", c.folds, "Cross-validation folds")->capture_default_str();
    app.add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
    app.add_option("--quad-nodes", c.quad_nodes, "Quadrature nodes, a multiple of 8")->capture_default_str();
    app.add_option("--threads", c.threads, "Worker threads for cross-validation")->capture_default_str();
    app.add_option("--min-pairs", c.min_pairs, "Pairs needed before a copula family is fitted")->capture_default_str();
    app.add_option("--max-missing-rate", c.max_missing_rate, "Ingest: drop stations missing this share or more")
        ->capture_default_str();
    app.add_option("--bin-width-km", c.bin_width_km, "Ingest: variogram bin width for imputation")->capture_default_str();
    app.add_flag("!--daily", c.weekly, "Ingest: keep the input time step instead of weekly means");
    app.add_option("--week-length", c.week_length, "Ingest: input steps per aggregated step")->capture_default_str();
    app.add_flag("!--impute-after-aggregation", c.impute_before_aggregation,
                 "Ingest: aggregate first, then impute the aggregated panel");

    Paths p;
    auto* ingest = app.add_subcommand("ingest", "Validate, filter, impute and aggregate raw CSVs");
    ingest->add_option("--stations", p.stations, "stations.csv (station_id,lon,lat)")->required();
    ingest->add_option("--observations", p.observations, "observations.csv (station_id,time,<variables>)")->required();
    ingest->add_option("--out", p.out, "Output dataset directory")->required();

    auto* fit = app.add_subcommand("fit", "Fit marginals and the vine on a dataset");
    fit->add_option("--data", p.data, "Dataset directory written by ingest")->required();
    fit->add_option("--out", p.out, "Model file to write")->required();
    fit->add_option("--model-kind", p.model_kind, "vine, gaussian-vine, stcv or kriging")->capture_default_str();

    auto* pred = app.add_subcommand("predict", "Predict means and intervals from a fitted model");
    pred->add_option("--data", p.data, "Dataset directory")->required();
    pred->add_option("--model", p.model, "Model file written by fit")->required();
    pred->add_option("--station", p.target_stations, "Target station id(s); default all");
    pred->add_option("--time", p.target_times, "Target time index(es), 1-based; default all with a predecessor");
    pred->add_option("--levels", p.levels, "Extra quantile levels")->delimiter(',');
    pred->add_option("--out", p.out, "CSV to write; default standard output");

    auto* cv = app.add_subcommand("cv", "Cross-validate model kinds with stations held out");
    cv->add_option("--data", p.data, "Dataset directory")->required();
    cv->add_option("--out", p.out, "Report directory")->required();
    cv->add_option("--models", p.models, "Comma-separated model kinds")->capture_default_str();

    auto* report = app.add_subcommand("report", "Correlogram plots, family and coverage tables");
    report->add_option("--model", p.model, "Model file written by fit");
    report->add_option("--cv-dir", p.cv_dir, "Directory written by cv");
    report->add_option("--out", p.out, "Output directory")->required();

    auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset with known dependence");
    sim->add_option("--out", p.out, "Output directory")->required();
    sim->add_option("--stations", p.sim_stations, "Number of stations")->capture_default_str();
    sim->add_option("--times", p.sim_times, "Number of time steps")->capture_default_str();
    sim->add_option("--missing", p.sim_missing, "Fraction of cells blanked at random")->capture_default_str();

    for (auto* s : {ingest, fit, pred, cv, report, sim}) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        validate(c);
    } catch (const Error& e) {
        return fail(kUsage, e.what());
    }
    try {
        if (*ingest) return cmd_ingest(c, p);
        if (*fit) return cmd_fit(c, p);
        if (*pred) return cmd_predict(c, p);
        if (*cv) return cmd_cv(c, p);
        if (*report) return cmd_report(p);
        if (*sim) return cmd_simulate(c, p);
    } catch (const std::exception& e) {
        return fail(kUsage, e.what());
    }
    return kUsage;
}

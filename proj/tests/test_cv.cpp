#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stvine/cv.hpp"
#include "stvine/synthetic.hpp"
#include "vine_fixtures.hpp"

using namespace stvine;
using namespace fixture;

namespace {

PanelDataset cv_panel(std::uint64_t seed, std::size_t stations = 12, std::size_t times = 20) {
    SyntheticOptions o;
    o.stations = stations;
    o.times = times;
    o.seed = seed;
    return simulate_panel(o);
}

CvConfig cv_config(std::size_t folds = 10) {
    CvConfig c;
    c.vine = small_config();
    c.folds = folds;
    c.seed = 17;
    return c;
}

void expect_same(const EvalReport& a, const EvalReport& b) {
    ASSERT_EQ(a.folds.size(), b.folds.size());
    for (std::size_t k = 0; k < a.folds.size(); ++k) {
        EXPECT_EQ(a.folds[k].held_out, b.folds[k].held_out);
        ASSERT_EQ(a.folds[k].predictions.size(), b.folds[k].predictions.size());
        for (std::size_t i = 0; i < a.folds[k].predictions.size(); ++i) {
            EXPECT_EQ(a.folds[k].predictions[i].mean, b.folds[k].predictions[i].mean);
            EXPECT_EQ(a.folds[k].predictions[i].lower, b.folds[k].predictions[i].lower);
        }
    }
    EXPECT_EQ(a.mean_all.mae, b.mean_all.mae);
    EXPECT_EQ(a.mean_all.rmse, b.mean_all.rmse);
    EXPECT_EQ(a.total_covered, b.total_covered);
}

}  // namespace

TEST(Folds, TenStationsGiveSingletons) {
    const auto folds = assign_folds(10, 10, 3);
    ASSERT_EQ(folds.size(), 10u);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        ASSERT_EQ(f.size(), 1u);
        seen.insert(f[0]);
    }
    EXPECT_EQ(seen.size(), 10u);
}

TEST(Folds, PartitionBalancedAndSeeded) {
    for (std::size_t n : {10u, 11u, 23u, 57u}) {
        const auto a = assign_folds(n, 10, 42), b = assign_folds(n, 10, 42);
        EXPECT_EQ(a, b);
        std::vector<int> hit(n, 0);
        std::size_t lo = n, hi = 0;
        for (const auto& f : a) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
            for (std::size_t s : f) ++hit[s];
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
    }
    EXPECT_NE(assign_folds(40, 10, 1), assign_folds(40, 10, 2));
    EXPECT_THROW(assign_folds(9, 10, 0), InsufficientDataError);
    EXPECT_THROW(assign_folds(9, 1, 0), DomainError);
}

TEST(CrossValidate, HeldOutStationsNeverTrain) {
    const PanelDataset ds = cv_panel(1);
    const EvalReport r = cross_validate(ds, ModelKind::Vine, cv_config());
    ASSERT_EQ(r.folds.size(), 10u);
    std::set<std::size_t> evaluated;
    for (const auto& f : r.folds) {
        std::vector<std::size_t> both;
        std::set_intersection(f.held_out.begin(), f.held_out.end(), f.training.begin(), f.training.end(),
                              std::back_inserter(both));
        EXPECT_TRUE(both.empty());
        EXPECT_EQ(f.held_out.size() + f.training.size(), ds.n_stations());
        ASSERT_FALSE(f.skipped);
        EXPECT_EQ(f.predictions.size(), f.held_out.size() * (ds.n_times() - 1));
        for (const auto& p : f.predictions) {
            EXPECT_TRUE(std::binary_search(f.held_out.begin(), f.held_out.end(), p.station));
            EXPECT_GE(p.time, 1u);
            evaluated.insert(p.station);
        }
        EXPECT_GE(f.coverage.percent, 0.0);
        EXPECT_LE(f.coverage.percent, 100.0);
        EXPECT_LE(f.all.mae, f.all.rmse);
    }
    EXPECT_EQ(evaluated.size(), ds.n_stations());
    EXPECT_EQ(r.total_targets, ds.n_stations() * (ds.n_times() - 1));
}

TEST(CrossValidate, DeterministicAndThreadIndependent) {
    const PanelDataset ds = cv_panel(2);
    CvConfig c = cv_config(5);
    const EvalReport a = cross_validate(ds, ModelKind::Vine, c);
    const EvalReport b = cross_validate(ds, ModelKind::Vine, c);
    expect_same(a, b);
    c.threads = 3;
    expect_same(a, cross_validate(ds, ModelKind::Vine, c));
}

TEST(CrossValidate, PerfectCopyPanelIsNearlyExact) {
    PanelDataset ds = cv_panel(3);
    for (std::size_t v = 0; v < ds.n_vars(); ++v)
        for (std::size_t s = 1; s < ds.n_stations(); ++s)
            for (std::size_t t = 0; t < ds.n_times(); ++t) ds(v, s, t) = ds(v, 0, t);
    const EvalReport r = cross_validate(ds, ModelKind::Vine, cv_config(5));
    EXPECT_LT(r.mean_all.mae, 1.0);
}

TEST(CrossValidate, OtherModelKindsShareThePipeline) {
    const PanelDataset ds = cv_panel(4);
    const CvConfig c = cv_config(5);
    for (ModelKind k : {ModelKind::GaussianVine, ModelKind::Stcv, ModelKind::Kriging}) {
        const EvalReport r = cross_validate(ds, k, c);
        EXPECT_EQ(r.kind, k);
        EXPECT_EQ(r.total_targets, ds.n_stations() * (ds.n_times() - 1)) << model_kind_name(k);
        EXPECT_TRUE(std::isfinite(r.mean_all.mae)) << model_kind_name(k);
        if (k == ModelKind::Kriging)
            EXPECT_EQ(r.variograms.size(), 5u * (ds.n_times() - 1));
        else
            EXPECT_TRUE(r.variograms.empty());
    }
}

TEST(CrossValidate, RejectsIncompletePanels) {
    PanelDataset ds = cv_panel(5);
    const MarginalTable tab = fit_marginal_table(ds, MarginalFamily::Gumbel);
    ds(0, 2, 3) = kNaN;
    EXPECT_THROW(cross_validate(ds, tab, ModelKind::Vine, cv_config()), DomainError);
    EXPECT_THROW(cross_validate(cv_panel(5, 8), ModelKind::Vine, cv_config()), InsufficientDataError);
}

TEST(CrossValidate, ReportFiles) {
    const PanelDataset ds = cv_panel(6);
    const EvalReport r = cross_validate(ds, ModelKind::Kriging, cv_config(5));
    std::ostringstream m, p, v, s;
    write_fold_metrics_csv(m, {r});
    write_predictions_csv(p, r, ds);
    write_variogram_csv(v, r.variograms);
    write_summary_table(s, {r});
    auto lines = [](const std::string& x) { return static_cast<std::size_t>(std::count(x.begin(), x.end(), '\n')); };
    EXPECT_EQ(m.str().substr(0, m.str().find('\n')), "model,marginal,fold,mae,rmse,mae_ext,rmse_ext,cov_n,cov_pct");
    EXPECT_EQ(lines(m.str()), 6u);
    EXPECT_EQ(p.str().substr(0, p.str().find('\n')), "station,time,observed,mean,q025,q975");
    EXPECT_EQ(lines(p.str()), 1 + r.total_targets);
    EXPECT_EQ(lines(v.str()), 1 + r.variograms.size());
    EXPECT_NE(s.str().find("kriging"), std::string::npos);
}

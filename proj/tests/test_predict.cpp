#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "stvine/marginal.hpp"
#include "stvine/pit.hpp"
#include "stvine/predict.hpp"
#include "stvine/random.hpp"
#include "stvine/synthetic.hpp"
#include "vine_fixtures.hpp"

using namespace stvine;
using namespace fixture;

namespace {

const MarginalSpec kTarget{MarginalFamily::Gumbel, 40.0, 15.0, 0.0};

}  // namespace

TEST(Predict, IndependenceReproducesTheMarginal) {
    VineModel m = bare_model(3);
    ResolvedNeighbors rn;
    rn.tree1.assign(3, PairMixture{});
    rn.u = {0.1, 0.5, 0.95};
    PredictOptions opt;
    opt.levels = {0.1, 0.5, 0.9};
    const Prediction p = predict_resolved(m, rn, kTarget, opt);
    const double mu = marginal_mean(kTarget);
    EXPECT_NEAR(p.mean, mu, 1e-3 * mu);
    for (const auto& [lv, q] : p.quantiles) EXPECT_NEAR(q, marginal_quantile(kTarget, lv), 1e-4 * std::abs(q)) << lv;
    EXPECT_NEAR(p.lower, marginal_quantile(kTarget, 0.025), 1e-3);
    EXPECT_NEAR(p.upper, marginal_quantile(kTarget, 0.975), 1e-3);

    // the same through the GEV branch
    const MarginalSpec gev{MarginalFamily::GEV, 40.0, 15.0, 0.2};
    EXPECT_NEAR(predict_resolved(m, rn, gev).mean, marginal_mean(gev), 1e-3 * marginal_mean(gev));
}

TEST(Predict, QuantilesMonotoneForFittedModel) {
    const PanelDataset ds = small_synthetic(11);
    const MarginalTable tab = fit_marginal_table(ds, MarginalFamily::Gumbel);
    const UniformPanel up = pit_transform(ds, tab);
    const DistanceMatrix dm(ds.stations);
    const VineFit fit = fit_vine(up, dm, all_stations(ds), small_config());
    PredictOptions opt;
    opt.levels = {0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.95};
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
        const std::size_t s = rng.below(ds.n_stations());
        const std::size_t t = 1 + rng.below(ds.n_times() - 1);
        std::vector<std::size_t> others;
        for (std::size_t o = 0; o < ds.n_stations(); ++o)
            if (o != s) others.push_back(o);
        const NeighborSet ns = build_neighborhood(up, dm, s, t, others, fit.model.neighbors);
        const Prediction p = predict(fit.model, ns, tab.at(ds.stations[s].id, ds.variables[0]).spec, opt);
        EXPECT_EQ(p.station, s);
        EXPECT_EQ(p.time, t);
        ASSERT_TRUE(std::isfinite(p.mean));
        double prev = p.lower;
        for (const auto& [lv, q] : p.quantiles) {
            // the density is positive everywhere, so consecutive levels separate strictly
            EXPECT_GT(q, prev) << "target " << i << " level " << lv;
            prev = q;
        }
        EXPECT_GT(p.upper, prev);
    }
}

TEST(Predict, GaussianMeanMatchesMonteCarlo) {
    // center 0 with neighbors 1 and 2; the vine is rooted at the center while
    // the sampler conditions on neighbor 1 first, so the two share no recursion
    const double r01 = 0.7, r02 = 0.5, p12_0 = 0.3;
    const double r12 = p12_0 * std::sqrt((1 - r01 * r01) * (1 - r02 * r02)) + r01 * r02;
    const double p02_1 = (r02 - r01 * r12) / std::sqrt((1 - r01 * r01) * (1 - r12 * r12));
    VineModel m = bare_model(2);
    m.upper[0] = gauss(p12_0);
    ResolvedNeighbors rn;
    rn.tree1 = {pure(gauss(r01)), pure(gauss(r02))};
    for (const auto& u : {std::vector<double>{0.8, 0.6}, std::vector<double>{0.2, 0.9}, std::vector<double>{0.03, 0.1}}) {
        rn.u = u;
        const double mean = predict_resolved(m, rn, kTarget).mean;

        const double b = h_function(gauss(r12), u[1], u[0]);
        Rng rng(2024);
        const int n = 1'000'000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = h_inverse(gauss(p02_1), rng.uniform_open(), b);
            const double x = marginal_quantile(kTarget, h_inverse(gauss(r01), a, u[0]));
            s += x;
            s2 += x * x;
        }
        const double mc = s / n, se = std::sqrt((s2 / n - mc * mc) / n);
        EXPECT_NEAR(mean, mc, 3 * se) << u[0] << "," << u[1] << " se " << se;
    }
}

TEST(Predict, IntervalsCalibratedOnDataFromTheModel) {
    auto [m, rn] = mixed_vine();
    Rng rng(99);
    const int n = 2000;
    int covered = 0;
    for (int i = 0; i < n; ++i) {
        const auto [u0, u] = sample_vine(m, rn, rng);
        ResolvedNeighbors r = rn;
        r.u = u;
        const ConditionalDistribution cd(m, r);
        if (cd.quantile(0.025) <= u0 && u0 <= cd.quantile(0.975)) ++covered;
    }
    const double pct = 100.0 * covered / n;
    EXPECT_GE(pct, 90.0);
    EXPECT_LE(pct, 98.0);
}

TEST(Metrics, HandArithmetic) {
    const std::vector<double> o{0, 0}, p{3, 4};
    const Metrics m = metrics(o, p);
    EXPECT_DOUBLE_EQ(m.mae, 3.5);
    EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(12.5));
    const Metrics z = metrics(o, o);
    EXPECT_EQ(z.mae, 0.0);
    EXPECT_EQ(z.rmse, 0.0);
}

TEST(Metrics, PowerMeanBounds) {
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<double> o(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            o[i] = 100 * rng.normal();
            p[i] = rep % 10 == 0 ? o[i] : 100 * rng.normal();
        }
        const Metrics m = metrics(o, p);
        EXPECT_LE(m.mae, m.rmse * (1 + 1e-12));
        EXPECT_LE(m.rmse, m.mae * std::sqrt(static_cast<double>(n)) * (1 + 1e-12));
    }
}

TEST(Metrics, Preconditions) {
    const std::vector<double> a{1, 2}, b{1};
    EXPECT_THROW(metrics(a, b), ShapeError);
    EXPECT_THROW(metrics(std::vector<double>{}, std::vector<double>{}), InsufficientDataError);
}

TEST(ExtremeSubset, Examples) {
    std::vector<double> v(100);
    Rng rng(3);
    for (double& x : v) x = rng.uniform();
    EXPECT_EQ(extreme_subset(v).size(), 5u);

    const std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(extreme_subset(ten), std::vector<std::size_t>{9});

    const std::vector<double> flat(40, 2.0);
    EXPECT_EQ(extreme_subset(flat), (std::vector<std::size_t>{0, 1}));

    const std::vector<double> tie{5, 1, 7, 7, 3};
    EXPECT_EQ(extreme_subset(tie, 0.2), std::vector<std::size_t>{2});
    EXPECT_EQ(extreme_subset(tie, 0.5), (std::vector<std::size_t>{0, 2, 3}));

    EXPECT_THROW(extreme_subset(ten, 0.0), DomainError);
    EXPECT_THROW(extreme_subset(ten, 1.0), DomainError);
}

TEST(ExtremeSubset, HoldsTheLargestValues) {
    Rng rng(8);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(1 + rng.below(300));
        for (double& x : v) x = std::floor(10 * rng.uniform());
        const auto idx = extreme_subset(v);
        ASSERT_EQ(idx.size(), static_cast<std::size_t>(std::ceil(v.size() * 0.05 - 1e-9)));
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i : idx) lo = std::min(lo, v[i]);
        std::size_t above = 0;
        for (double x : v) above += x > lo;
        EXPECT_LE(above, idx.size());
    }
}

TEST(Coverage, WideAndZeroWidthIntervals) {
    const std::vector<double> obs{1, 50, -3, 1e6};
    std::vector<Prediction> wide(4), point(4);
    for (std::size_t i = 0; i < 4; ++i) {
        wide[i].lower = -1e300;
        wide[i].upper = 1e300;
        point[i].lower = point[i].upper = obs[i] + 1;
    }
    const Coverage all = interval_coverage(wide, obs);
    EXPECT_EQ(all.count, 4u);
    EXPECT_DOUBLE_EQ(all.percent, 100.0);
    const Coverage none = interval_coverage(point, obs);
    EXPECT_EQ(none.count, 0u);
    EXPECT_DOUBLE_EQ(none.percent, 0.0);

    // endpoints count as covered
    point[0].lower = point[0].upper = obs[0];
    EXPECT_EQ(interval_coverage(point, obs).count, 1u);
    EXPECT_THROW(interval_coverage(point, std::vector<double>{1.0}), ShapeError);
}

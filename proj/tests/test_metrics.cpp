#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "aod/metrics.hpp"
#include "aod/rng.hpp"

using namespace aod;

namespace {

// independent elementwise oracle, kept deliberately naive
struct NaiveStats {
    double rmse, mae, mbe;
};

NaiveStats naive_stats(const std::vector<double>& pred, const std::vector<double>& truth) {
    double se = 0, ae = 0, be = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        se = se + (pred[i] - truth[i]) * (pred[i] - truth[i]);
        ae = ae + std::abs(pred[i] - truth[i]);
        be = be + (pred[i] - truth[i]);
    }
    const double n = static_cast<double>(pred.size());
    return {std::sqrt(se / n), ae / n, be / n};
}

std::vector<CollocatedPair> make_pairs(const std::vector<double>& pred,
                                       const std::vector<double>& truth) {
    std::vector<CollocatedPair> pairs;
    for (std::size_t i = 0; i < pred.size(); ++i)
        pairs.push_back({{"site", 0.0, 0.0}, 20150601, pred[i], truth[i], 1.0});
    return pairs;
}

} // namespace

TEST_CASE("compute_stats: identity and hand arithmetic", "[metrics]") {
    std::vector<double> a{0.3, 0.4, 0.5};
    ErrorStats same = compute_stats(a, a);
    CHECK(same.rmse == 0.0);
    CHECK(same.mae == 0.0);
    CHECK(same.mbe == 0.0);
    CHECK(same.n == 3);

    std::vector<double> pred{0.1, 0.3, 0.5}, truth{0.2, 0.2, 0.2};
    ErrorStats s = compute_stats(pred, truth);
    CHECK_THAT(s.mbe, Catch::Matchers::WithinAbs(0.1, 1e-12));
    CHECK_THAT(s.mae, Catch::Matchers::WithinAbs(0.1666666666, 1e-5));
    CHECK_THAT(s.rmse, Catch::Matchers::WithinAbs(0.191485, 1e-5));
}

TEST_CASE("compute_stats: errors", "[metrics]") {
    std::vector<double> a{0.1}, b{0.1, 0.2}, empty;
    CHECK_THROWS_AS(compute_stats(a, b), DataError);
    CHECK_THROWS_AS(compute_stats(empty, empty), DataError);
}

TEST_CASE("compute_stats: matches the naive oracle on seeded vectors", "[metrics]") {
    Xoshiro256 rng(1000);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.next_below(40);
        std::vector<double> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.uniform(0.0, 3.0);
            truth[i] = rng.uniform(0.0, 3.0);
        }
        ErrorStats s = compute_stats(pred, truth);
        NaiveStats o = naive_stats(pred, truth);
        CHECK_THAT(s.rmse, Catch::Matchers::WithinRel(o.rmse, 1e-12) ||
                               Catch::Matchers::WithinAbs(o.rmse, 1e-15));
        CHECK_THAT(s.mae, Catch::Matchers::WithinRel(o.mae, 1e-12) ||
                              Catch::Matchers::WithinAbs(o.mae, 1e-15));
        CHECK_THAT(s.mbe, Catch::Matchers::WithinRel(o.mbe, 1e-12) ||
                              Catch::Matchers::WithinAbs(o.mbe, 1e-15));
        CHECK(s.mae >= std::fabs(s.mbe) - 1e-15);
        CHECK(s.rmse >= std::fabs(s.mbe) - 1e-15);
    }
}

TEST_CASE("compute_stats: homogeneity and permutation invariance", "[metrics]") {
    Xoshiro256 rng(2000);
    std::vector<double> pred(25), truth(25);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = rng.uniform(0.0, 2.0);
        truth[i] = rng.uniform(0.0, 2.0);
    }
    ErrorStats base = compute_stats(pred, truth);

    const double c = 3.7;
    std::vector<double> pred_c = pred, truth_c = truth;
    for (auto& v : pred_c) v *= c;
    for (auto& v : truth_c) v *= c;
    ErrorStats scaled = compute_stats(pred_c, truth_c);
    CHECK_THAT(scaled.rmse, Catch::Matchers::WithinRel(c * base.rmse, 1e-12));
    CHECK_THAT(scaled.mae, Catch::Matchers::WithinRel(c * base.mae, 1e-12));
    CHECK_THAT(scaled.mbe, Catch::Matchers::WithinRel(c * base.mbe, 1e-12));

    std::vector<std::size_t> perm(pred.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (7 * i + 3) % perm.size();
    std::vector<double> pred_p(pred.size()), truth_p(truth.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        pred_p[i] = pred[perm[i]];
        truth_p[i] = truth[perm[i]];
    }
    ErrorStats permuted = compute_stats(pred_p, truth_p);
    CHECK_THAT(permuted.rmse, Catch::Matchers::WithinRel(base.rmse, 1e-12));
    CHECK_THAT(permuted.mbe, Catch::Matchers::WithinRel(base.mbe, 1e-12));
}

TEST_CASE("breakdown: partition counts and empty partitions", "[metrics]") {
    std::vector<double> pred{0.1, 0.2, 0.3, 0.9}, truth{0.2, 0.3, 0.8, 1.2};
    BreakdownReport rep = breakdown(make_pairs(pred, truth));
    CHECK(rep.normal.n + rep.extreme.n == rep.all.n);
    CHECK(rep.extreme.n == 2);

    BreakdownReport no_extreme = breakdown(make_pairs({0.1, 0.2}, {0.2, 0.3}));
    CHECK(no_extreme.extreme.n == 0);
    CHECK(std::isnan(no_extreme.extreme.rmse));
    CHECK(no_extreme.all.n == 2);

    BreakdownReport high_threshold = breakdown(make_pairs(pred, truth), 999.0);
    CHECK(high_threshold.extreme.n == 0);
    CHECK(high_threshold.normal.n == 4);
}

TEST_CASE("breakdown: partition stats equal per-partition compute_stats", "[metrics]") {
    Xoshiro256 rng(321);
    std::vector<double> pred, truth;
    for (int i = 0; i < 200; ++i) {
        pred.push_back(rng.uniform(0.0, 1.5));
        truth.push_back(rng.uniform(0.0, 1.5));
    }
    BreakdownReport rep = breakdown(make_pairs(pred, truth));

    std::vector<double> np, nt, ep, et;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (truth[i] > 0.7) {
            ep.push_back(pred[i]);
            et.push_back(truth[i]);
        } else {
            np.push_back(pred[i]);
            nt.push_back(truth[i]);
        }
    }
    ErrorStats en = compute_stats(np, nt), ee = compute_stats(ep, et);
    CHECK_THAT(rep.normal.rmse, Catch::Matchers::WithinRel(en.rmse, 1e-15));
    CHECK_THAT(rep.extreme.rmse, Catch::Matchers::WithinRel(ee.rmse, 1e-15));
    CHECK_THAT(rep.extreme.mbe, Catch::Matchers::WithinRel(ee.mbe, 1e-15));
    CHECK(rep.normal.n == en.n);
    CHECK(rep.extreme.n == ee.n);
}

namespace {

std::vector<CollocatedPair> multi_site_pairs(Xoshiro256& rng, const std::vector<std::string>& names,
                                             const std::vector<std::size_t>& counts) {
    std::vector<CollocatedPair> pairs;
    for (std::size_t s = 0; s < names.size(); ++s)
        for (std::size_t i = 0; i < counts[s]; ++i)
            pairs.push_back({{names[s], 10.0 + static_cast<double>(s), 20.0}, 20150601,
                             rng.uniform(0.0, 1.2), rng.uniform(0.0, 1.2), 1.0});
    return pairs;
}

} // namespace

TEST_CASE("per_site: zero error site and the min-obs filter", "[metrics]") {
    std::vector<CollocatedPair> pairs;
    for (int i = 0; i < 365; ++i)
        pairs.push_back({{"OneYear", 0.0, 0.0}, 20150601, 0.4, 0.4, 1.0});
    auto stats = per_site(pairs);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].stats.rmse == 0.0);
    CHECK(stats[0].stats.mae == 0.0);
    CHECK(stats[0].stats.n == 365);

    // the >365-observations filter drops a site with exactly 365 pairs
    CHECK(per_site(pairs, 366).empty());
    CHECK(per_site(pairs, 365).size() == 1);
}

TEST_CASE("per_site: matches a brute-force group-by", "[metrics]") {
    Xoshiro256 rng(77);
    auto pairs = multi_site_pairs(rng, {"c_site", "a_site", "b_site"}, {20, 30, 25});
    auto stats = per_site(pairs);
    REQUIRE(stats.size() == 3);
    CHECK(stats[0].site.name == "a_site"); // sorted by name
    CHECK(stats[1].site.name == "b_site");
    CHECK(stats[2].site.name == "c_site");

    std::map<std::string, std::vector<const CollocatedPair*>> groups;
    for (const auto& p : pairs) groups[p.site.name].push_back(&p);
    for (const SiteStats& s : stats) {
        const auto& group = groups[s.site.name];
        REQUIRE(s.stats.n == group.size());
        std::vector<double> pred, truth;
        std::size_t extremes = 0;
        double mean = 0;
        for (const auto* p : group) {
            pred.push_back(p->merra_aod);
            truth.push_back(p->aeronet_aod);
            mean += p->aeronet_aod;
            if (p->aeronet_aod > 0.7) ++extremes;
        }
        mean /= static_cast<double>(group.size());
        double var = 0;
        for (double t : truth) var += (t - mean) * (t - mean);
        var /= static_cast<double>(group.size());
        ErrorStats oracle = compute_stats(pred, truth);
        CHECK_THAT(s.stats.rmse, Catch::Matchers::WithinRel(oracle.rmse, 1e-12));
        CHECK(s.extreme_count == extremes);
        CHECK_THAT(s.variance, Catch::Matchers::WithinRel(var, 1e-12) ||
                                   Catch::Matchers::WithinAbs(var, 1e-15));
    }
}

TEST_CASE("rank_sites: order, ties, and the sort oracle", "[metrics]") {
    SiteStats a;
    a.site = {"alpha", 0, 0};
    a.extreme_count = 5;
    a.variance = 0.2;
    SiteStats b = a;
    b.site.name = "beta";
    b.extreme_count = 9;
    SiteStats c = a;
    c.site.name = "gamma";
    c.extreme_count = 5;

    auto top1 = rank_sites({a}, RankKey::ExtremeCount, 1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0].site.name == "alpha");

    auto ranked = rank_sites({c, b, a}, RankKey::ExtremeCount, 3);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].site.name == "beta");
    CHECK(ranked[1].site.name == "alpha"); // tie with gamma breaks alphabetically
    CHECK(ranked[2].site.name == "gamma");

    Xoshiro256 rng(88);
    std::vector<SiteStats> many;
    for (int i = 0; i < 100; ++i) {
        SiteStats s;
        s.site = {"site" + std::to_string(i), 0, 0};
        s.variance = rng.uniform(0.0, 1.0);
        s.stats.rmse = rng.uniform(0.0, 1.0);
        s.extreme_count = rng.next_below(50);
        many.push_back(s);
    }
    auto top5 = rank_sites(many, RankKey::Variance, 5);
    auto sorted = many;
    std::sort(sorted.begin(), sorted.end(), [](const SiteStats& x, const SiteStats& y) {
        if (x.variance != y.variance) return x.variance > y.variance;
        return x.site.name < y.site.name;
    });
    REQUIRE(top5.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(top5[i].site.name == sorted[i].site.name);
}

TEST_CASE("compare_models: perfect model and baseline echo", "[metrics]") {
    Xoshiro256 rng(5150);
    std::vector<double> pred, truth;
    for (int i = 0; i < 60; ++i) {
        pred.push_back(rng.uniform(0.0, 1.2));
        truth.push_back(rng.uniform(0.0, 1.2));
    }
    auto pairs = make_pairs(pred, truth);

    ModelComparison perfect = compare_models(pairs, truth);
    CHECK(perfect.model.all.rmse == 0.0);
    CHECK(perfect.model.all.mae == 0.0);
    CHECK(perfect.model.all.mbe == 0.0);

    ModelComparison echo = compare_models(pairs, pred);
    CHECK(echo.model.all.rmse == echo.baseline.all.rmse);
    CHECK(echo.model.extreme.n == echo.baseline.extreme.n);
    CHECK(echo.model.all.mbe == echo.baseline.all.mbe);

    std::vector<double> short_preds{0.1};
    CHECK_THROWS_AS(compare_models(pairs, short_preds), DataError);
}

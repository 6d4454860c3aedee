#include <doctest.h>

#include <cmath>
#include <random>

#include "habench/rng.hpp"
#include "habench/stats.hpp"
#include "oracles.hpp"

using namespace habench;
namespace st = habench::stats;

namespace {

std::vector<std::span<const double>> views(const std::vector<std::vector<double>>& groups) {
    std::vector<std::span<const double>> v;
    for (const auto& g : groups) v.emplace_back(g);
    return v;
}

}  // namespace

TEST_CASE("regularized incomplete beta closed forms") {
    CHECK(st::reg_inc_beta(0.0, 1.0, 1.0) == 0.0);
    CHECK(st::reg_inc_beta(1.0, 1.0, 1.0) == 1.0);
    CHECK(st::reg_inc_beta(0.25, 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
    for (double a : {1.0, 2.5, 10.0})
        CHECK(st::reg_inc_beta(0.5, a, a) == doctest::Approx(0.5).epsilon(1e-12));
    // I_x(1, b) = 1 - (1-x)^b
    CHECK(st::reg_inc_beta(0.3, 1.0, 4.0) ==
          doctest::Approx(1.0 - std::pow(0.7, 4)).epsilon(1e-12));
    CHECK_THROWS_AS(st::reg_inc_beta(-0.1, 1.0, 1.0), Error);
    CHECK_THROWS_AS(st::reg_inc_beta(0.5, 0.0, 1.0), Error);
}

TEST_CASE("f_sf fixed points") {
    CHECK(st::f_sf(0.0, 1, 4) == 1.0);
    CHECK(st::f_sf(1.0, 2, 2) == doctest::Approx(0.5).epsilon(1e-12));
    // F(1, nu) = t(nu)^2
    CHECK(st::f_sf(13.5, 1, 4) ==
          doctest::Approx(2.0 * st::t_sf(std::sqrt(13.5), 4)).epsilon(1e-12));
    CHECK_THROWS_AS(st::f_sf(-1.0, 1, 4), Error);
    CHECK_THROWS_AS(st::f_sf(1.0, 0, 4), Error);
}

TEST_CASE("t_sf symmetry") {
    CHECK(st::t_sf(0.0, 7) == 0.5);
    CHECK(st::t_sf(-2.0, 5) + st::t_sf(2.0, 5) == doctest::Approx(1.0).epsilon(1e-12));
    const double p = st::t_sf(3.6742, 4);
    CHECK(p > 0.009);
    CHECK(p < 0.012);
}

TEST_CASE("survival functions match quadrature oracle") {
    const std::vector<std::int64_t> dfs = {1, 2, 4, 7, 30, 120, 834};
    int points = 0;
    for (auto df : dfs) {
        for (double t : {0.1, 0.5, 1.0, 2.0, 3.5, 6.0}) {
            const double expected = oracles::t_sf_quad(t, static_cast<double>(df));
            CHECK(st::t_sf(t, df) == doctest::Approx(expected).epsilon(1e-9));
            ++points;
        }
    }
    for (auto d1 : {1, 2, 4, 10}) {
        for (auto d2 : {2, 4, 30, 834}) {
            for (double f : {0.5, 1.0, 3.0, 10.0}) {
                const double expected = oracles::f_sf_quad(f, d1, d2);
                CHECK(st::f_sf(f, d1, d2) == doctest::Approx(expected).epsilon(1e-9));
                ++points;
            }
        }
    }
    CHECK(points >= 100);
}

TEST_CASE("deep tails stay accurate") {
    // t values chosen so p is near 1e-10 for each df.
    struct Case { std::int64_t df; double t; };
    for (auto [df, t] : {Case{1, 3.2e9}, Case{4, 270.0}, Case{30, 10.0}, Case{834, 6.6}}) {
        const double p = st::t_sf(t, df);
        const double expected = oracles::t_sf_quad(t, static_cast<double>(df));
        CHECK(p < 1e-6);
        CHECK(p == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("oneway anova hand oracle") {
    const std::vector<std::vector<double>> groups = {{1, 2, 3}, {4, 5, 6}};
    const auto r = st::oneway_anova(views(groups));
    CHECK(r.f == doctest::Approx(13.5).epsilon(1e-12));
    CHECK(r.df_between == 1);
    CHECK(r.df_within == 4);
    CHECK(r.ss_between == doctest::Approx(13.5).epsilon(1e-12));
    CHECK(r.ss_within == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(st::eta_squared(r) == doctest::Approx(13.5 / 17.5).epsilon(1e-12));
}

TEST_CASE("anova zero-variance conventions") {
    const std::vector<std::vector<double>> same = {{1, 2}, {1, 2}};
    const auto r1 = st::oneway_anova(views(same));
    CHECK(r1.f == 0.0);
    CHECK(r1.p == 1.0);
    CHECK(st::eta_squared(r1) == 0.0);

    const std::vector<std::vector<double>> flat = {{1, 1}, {2, 2}};
    const auto r2 = st::oneway_anova(views(flat));
    CHECK(std::isinf(r2.f));
    CHECK(r2.p == 0.0);
    CHECK(st::eta_squared(r2) == 1.0);

    const std::vector<std::vector<double>> constant = {{3, 3}, {3, 3}};
    const auto r3 = st::oneway_anova(views(constant));
    CHECK(r3.f == 0.0);
    CHECK(r3.p == 1.0);
    CHECK(st::eta_squared(r3) == 0.0);
}

TEST_CASE("anova input validation") {
    CHECK_THROWS_AS(st::oneway_anova(views({{1, 2, 3}})), Error);
    CHECK_THROWS_AS(st::oneway_anova(views({{1.0}, {2, 3}})), Error);
}

TEST_CASE("pairwise t hand oracle") {
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {4, 5, 6};
    const auto r = st::pairwise_t(a, b);
    CHECK(r.t == doctest::Approx(-3.0 / std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    CHECK(r.df == 4);
    CHECK(r.p == doctest::Approx(2.0 * st::t_sf(std::abs(r.t), 4)).epsilon(1e-12));

    const auto same = st::pairwise_t(a, a);
    CHECK(same.t == 0.0);
    CHECK(same.p == 1.0);

    const std::vector<double> c1 = {1, 1};
    const std::vector<double> c2 = {2, 2};
    CHECK(st::pairwise_t(c1, c2).p == 0.0);
}

TEST_CASE("hedges g hand oracle") {
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {4, 5, 6};
    CHECK(st::hedges_g(a, b) == doctest::Approx(-2.4).epsilon(1e-12));
    CHECK(st::hedges_g(b, a) == doctest::Approx(2.4).epsilon(1e-12));
    const std::vector<double> c = {1, 2, 3};
    CHECK(st::hedges_g(a, c) == 0.0);
    const std::vector<double> flat = {1, 1};
    CHECK_THROWS_AS(st::hedges_g(flat, flat), Error);
}

TEST_CASE("bonferroni threshold") {
    CHECK(st::bonferroni_threshold(0.05, 1) == 0.05);
    CHECK(st::bonferroni_threshold(0.05, 11880) == doctest::Approx(0.05 / 11880));
    CHECK(st::bonferroni_threshold(0.01, 5) == doctest::Approx(0.002));
    CHECK_THROWS_AS(st::bonferroni_threshold(1.5, 10), Error);
    CHECK_THROWS_AS(st::bonferroni_threshold(0.05, 0), Error);
}

TEST_CASE("random instances match brute-force oracle") {
    Substream stream(20240817, 0, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int s = 2 + static_cast<int>(stream.next_u64() % 4);
        std::vector<std::vector<double>> groups(s);
        for (auto& g : groups) {
            const int n = 2 + static_cast<int>(stream.next_u64() % 8);
            for (int i = 0; i < n; ++i)
                g.push_back(stream.next_normal() * 3.0 + 1.5);
        }
        const auto got = st::oneway_anova(views(groups));
        const auto want = oracles::anova_sums(groups);
        CHECK(got.ss_total ==
              doctest::Approx(got.ss_between + got.ss_within).epsilon(1e-10));
        CHECK(got.f == doctest::Approx(want.f).epsilon(1e-10));
        CHECK(got.ss_between == doctest::Approx(want.ss_between).epsilon(1e-10));
        const double eta = st::eta_squared(got);
        CHECK(eta >= 0.0);
        CHECK(eta <= 1.0);
        CHECK(eta == doctest::Approx(want.ss_between / want.ss_total).epsilon(1e-10));

        const auto t = st::pairwise_t(groups[0], groups[1]);
        CHECK(t.t == doctest::Approx(oracles::pooled_t_oracle(groups[0], groups[1]))
                         .epsilon(1e-10));
        CHECK(st::hedges_g(groups[0], groups[1]) ==
              doctest::Approx(oracles::hedges_g_oracle(groups[0], groups[1])).epsilon(1e-10));
    }
}

TEST_CASE("two-group anova equals squared t") {
    Substream stream(7, 1, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> groups(2);
        for (auto& g : groups) {
            const int n = 2 + static_cast<int>(stream.next_u64() % 10);
            for (int i = 0; i < n; ++i) g.push_back(stream.next_normal());
        }
        const auto anova = st::oneway_anova(views(groups));
        const auto t = st::pairwise_t(groups[0], groups[1]);
        CHECK(anova.f == doctest::Approx(t.t * t.t).epsilon(1e-10));
        CHECK(anova.p == doctest::Approx(t.p).epsilon(1e-9));
    }
}

TEST_CASE("shift and scale invariance") {
    Substream stream(99, 2, 0);
    std::vector<std::vector<double>> groups(3);
    for (auto& g : groups)
        for (int i = 0; i < 6; ++i) g.push_back(stream.next_normal() + 0.4);

    const auto base = st::oneway_anova(views(groups));
    const double base_t = st::pairwise_t(groups[0], groups[1]).t;
    const double base_g = st::hedges_g(groups[0], groups[1]);

    for (double shift : {10.0, -2.5}) {
        auto shifted = groups;
        for (auto& g : shifted)
            for (auto& x : g) x += shift;
        const auto r = st::oneway_anova(views(shifted));
        CHECK(r.f == doctest::Approx(base.f).epsilon(1e-9));
        CHECK(st::eta_squared(r) == doctest::Approx(st::eta_squared(base)).epsilon(1e-9));
        CHECK(st::pairwise_t(shifted[0], shifted[1]).t == doctest::Approx(base_t).epsilon(1e-9));
        CHECK(st::hedges_g(shifted[0], shifted[1]) == doctest::Approx(base_g).epsilon(1e-9));
    }
    for (double scale : {3.0, 0.01}) {
        auto scaled = groups;
        for (auto& g : scaled)
            for (auto& x : g) x *= scale;
        const auto r = st::oneway_anova(views(scaled));
        CHECK(r.f == doctest::Approx(base.f).epsilon(1e-9));
        CHECK(st::eta_squared(r) == doctest::Approx(st::eta_squared(base)).epsilon(1e-9));
        CHECK(st::pairwise_t(scaled[0], scaled[1]).t == doctest::Approx(base_t).epsilon(1e-9));
        CHECK(st::hedges_g(scaled[0], scaled[1]) == doctest::Approx(base_g).epsilon(1e-9));
    }
}

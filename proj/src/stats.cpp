#include "habench/stats.hpp"

#include <cmath>
#include <limits>

namespace habench::stats {

namespace {

// Modified Lentz continued fraction for the incomplete beta function.
double beta_cf(double x, double a, double b) {
    constexpr int max_iter = 300;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) break;
    }
    return h;
}

struct Moments {
    std::int64_t n;
    double mean;
    double ss;  // sum of squared deviations from the mean
};

Moments moments(std::span<const double> values) {
    Moments m{static_cast<std::int64_t>(values.size()), 0.0, 0.0};
    for (double v : values) m.mean += v;
    m.mean /= static_cast<double>(m.n);
    for (double v : values) m.ss += (v - m.mean) * (v - m.mean);
    return m;
}

}  // namespace

double reg_inc_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error("reg_inc_beta: x outside [0, 1]");
    if (!(a > 0.0) || !(b > 0.0)) throw Error("reg_inc_beta: a and b must be positive");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     beta_cf(1.0 - x, b, a) / b;
}

double f_sf(double f, std::int64_t d1, std::int64_t d2) {
    if (!(f >= 0.0)) throw Error("f_sf: statistic must be nonnegative");
    if (d1 < 1 || d2 < 1) throw Error("f_sf: degrees of freedom must be positive");
    if (f == 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double x = d2 / (d2 + d1 * f);
    return reg_inc_beta(x, d2 / 2.0, d1 / 2.0);
}

double t_sf(double t, std::int64_t df) {
    if (df < 1) throw Error("t_sf: degrees of freedom must be positive");
    if (std::isnan(t)) throw Error("t_sf: statistic is NaN");
    if (t < 0.0) return 1.0 - t_sf(-t, df);
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return 0.5 * reg_inc_beta(x, df / 2.0, 0.5);
}

AnovaResult oneway_anova(const std::vector<std::span<const double>>& groups) {
    const std::int64_t s = static_cast<std::int64_t>(groups.size());
    if (s < 2) throw Error("oneway_anova: need at least 2 groups");

    std::int64_t n = 0;
    double grand_sum = 0.0;
    std::vector<Moments> ms;
    ms.reserve(groups.size());
    for (const auto& g : groups) {
        if (g.size() < 2) throw Error("oneway_anova: every group needs at least 2 samples");
        Moments m = moments(g);
        n += m.n;
        grand_sum += m.mean * static_cast<double>(m.n);
        ms.push_back(m);
    }
    const double grand_mean = grand_sum / static_cast<double>(n);

    AnovaResult r;
    r.df_between = s - 1;
    r.df_within = n - s;
    for (const auto& m : ms) {
        r.ss_between += static_cast<double>(m.n) * (m.mean - grand_mean) * (m.mean - grand_mean);
        r.ss_within += m.ss;
    }
    r.ss_total = r.ss_between + r.ss_within;

    if (r.ss_within == 0.0) {
        if (r.ss_between > 0.0) {
            r.f = std::numeric_limits<double>::infinity();
            r.p = 0.0;
        } else {
            r.f = 0.0;
            r.p = 1.0;
        }
        return r;
    }
    r.f = (r.ss_between / r.df_between) / (r.ss_within / r.df_within);
    r.p = f_sf(r.f, r.df_between, r.df_within);
    return r;
}

double eta_squared(const AnovaResult& anova) {
    if (anova.ss_total == 0.0) return 0.0;
    return anova.ss_between / anova.ss_total;
}

TTestResult pairwise_t(std::span<const double> group_i, std::span<const double> group_j) {
    if (group_i.size() < 2 || group_j.size() < 2)
        throw Error("pairwise_t: every group needs at least 2 samples");
    const Moments mi = moments(group_i);
    const Moments mj = moments(group_j);

    TTestResult r;
    r.df = mi.n + mj.n - 2;
    const double pooled_var = (mi.ss + mj.ss) / static_cast<double>(r.df);
    if (pooled_var == 0.0) {
        if (mi.mean == mj.mean) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = mi.mean > mj.mean ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    const double se = std::sqrt(pooled_var * (1.0 / mi.n + 1.0 / mj.n));
    r.t = (mi.mean - mj.mean) / se;
    r.p = 2.0 * t_sf(std::abs(r.t), r.df);
    return r;
}

double hedges_g(std::span<const double> group_i, std::span<const double> group_j) {
    if (group_i.size() < 2 || group_j.size() < 2)
        throw Error("hedges_g: every group needs at least 2 samples");
    const Moments mi = moments(group_i);
    const Moments mj = moments(group_j);
    const std::int64_t df = mi.n + mj.n - 2;
    const double pooled_var = (mi.ss + mj.ss) / static_cast<double>(df);
    if (pooled_var == 0.0) throw Error("hedges_g: zero pooled variance");
    const double correction = 1.0 - 3.0 / (4.0 * df - 1.0);
    return correction * (mi.mean - mj.mean) / std::sqrt(pooled_var);
}

double bonferroni_threshold(double alpha, std::int64_t m) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("bonferroni_threshold: alpha outside (0, 1)");
    if (m < 1) throw Error("bonferroni_threshold: m must be >= 1");
    return alpha / static_cast<double>(m);
}

}  // namespace habench::stats

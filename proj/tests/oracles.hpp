#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately separate from the library's computation paths: direct
// sums of squares for the ANOVA family, adaptive quadrature over the
// F and t densities for the survival functions, brute-force erosion
// and closed-form normal equations for the regressions.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "habench/types.hpp"

namespace oracles {

// ---- adaptive Simpson quadrature -----------------------------------------

inline double simpson(const std::function<double(double)>& f, double a, double m, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(f, a, lm, m, fa, flm, fm);
    const double right = simpson(f, m, rm, b, fm, frm, fb);
    const double delta = left + right - whole;
    // Stop once the Richardson correction reaches the requested tolerance or
    // the evaluation-noise floor of the subpanel values. The densities are
    // computed as exp of a difference of large log-gamma terms, so at high
    // degrees of freedom they carry ~1e-12 relative jitter; asking for a tol
    // below that times |integral| (sharp peak after near-empty lead-in
    // panels) makes the criterion unsatisfiable and the recursion explodes.
    const double noise = 1e-11 * (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol + noise)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = simpson(f, a, m, b, fa, fm, fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60);
}

// ---- densities ------------------------------------------------------------

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double f_density(double x, double d1, double d2) {
    if (x <= 0.0) return 0.0;
    const double log_pdf = 0.5 * (d1 * std::log(d1 * x) + d2 * std::log(d2) -
                                  (d1 + d2) * std::log(d1 * x + d2)) -
                           std::log(x) - log_beta(d1 / 2.0, d2 / 2.0);
    return std::exp(log_pdf);
}

inline double t_density(double x, double df) {
    const double log_pdf = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                           0.5 * std::log(df * M_PI) -
                           (df + 1.0) / 2.0 * std::log1p(x * x / df);
    return std::exp(log_pdf);
}

// Upper tail by doubling panels until the next panel no longer matters
// at the requested relative tolerance.
inline double tail_integral(const std::function<double(double)>& density, double from,
                            double rel_tol = 1e-12) {
    double total = 0.0;
    double lo = from;
    double width = std::max(std::abs(from), 1.0);
    for (int panel = 0; panel < 400; ++panel) {
        const double hi = lo + width;
        const double mid = 0.5 * (lo + hi);
        const double rough =
            (hi - lo) / 6.0 * (density(lo) + 4.0 * density(mid) + density(hi));
        double tol = std::max(rough, total) * rel_tol * 0.1;
        if (!(tol > 0.0)) tol = 1e-300;
        const double piece = adaptive_simpson(density, lo, hi, tol);
        total += piece;
        if (piece < total * rel_tol && panel > 2) break;
        lo = hi;
        width *= 2.0;
    }
    return total;
}

inline double f_sf_quad(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    return tail_integral([=](double x) { return f_density(x, d1, d2); }, f);
}

inline double t_sf_quad(double t, double df) {
    if (t < 0.0) return 1.0 - t_sf_quad(-t, df);
    if (t == 0.0) return 0.5;
    return tail_integral([=](double x) { return t_density(x, df); }, t);
}

// ---- brute-force ANOVA sums of squares ------------------------------------

struct AnovaSums {
    double ss_between = 0.0;
    double ss_within = 0.0;
    double ss_total = 0.0;
    double f = 0.0;
    long n = 0;
    long s = 0;
};

inline AnovaSums anova_sums(const std::vector<std::vector<double>>& groups) {
    AnovaSums sums;
    sums.s = static_cast<long>(groups.size());
    long double grand = 0.0L;
    for (const auto& g : groups) {
        sums.n += static_cast<long>(g.size());
        for (double v : g) grand += v;
    }
    grand /= sums.n;
    for (const auto& g : groups) {
        long double mean = 0.0L;
        for (double v : g) mean += v;
        mean /= g.size();
        sums.ss_between += static_cast<double>(g.size() * (mean - grand) * (mean - grand));
        for (double v : g) {
            sums.ss_within += static_cast<double>((v - mean) * (v - mean));
            sums.ss_total += static_cast<double>((v - grand) * (v - grand));
        }
    }
    const long df1 = sums.s - 1;
    const long df2 = sums.n - sums.s;
    if (sums.ss_within > 0.0)
        sums.f = (sums.ss_between / df1) / (sums.ss_within / df2);
    return sums;
}

inline double pooled_t_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const auto mean = [](const std::vector<double>& v) {
        long double s = 0.0L;
        for (double x : v) s += x;
        return static_cast<double>(s / v.size());
    };
    const double ma = mean(a);
    const double mb = mean(b);
    long double ssa = 0.0L, ssb = 0.0L;
    for (double x : a) ssa += (x - ma) * (x - ma);
    for (double x : b) ssb += (x - mb) * (x - mb);
    const double df = static_cast<double>(a.size() + b.size() - 2);
    const double sp2 = static_cast<double>(ssa + ssb) / df;
    return (ma - mb) / std::sqrt(sp2 * (1.0 / a.size() + 1.0 / b.size()));
}

inline double hedges_g_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double df = static_cast<double>(a.size() + b.size() - 2);
    const double t = pooled_t_oracle(a, b);
    const double se = std::sqrt(1.0 / a.size() + 1.0 / b.size());
    const double d = t * se;  // (ma - mb) / sp
    return (1.0 - 3.0 / (4.0 * df - 1.0)) * d;
}

// ---- brute-force 6-connected erosion --------------------------------------

inline std::vector<bool> erode_flags(const std::vector<bool>& flags,
                                     const std::array<std::int64_t, 3>& dims) {
    auto at = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> bool {
        if (x < 0 || y < 0 || z < 0 || x >= dims[0] || y >= dims[1] || z >= dims[2]) return false;
        return flags[x + dims[0] * (y + dims[1] * z)];
    };
    std::vector<bool> out(flags.size(), false);
    for (std::int64_t z = 0; z < dims[2]; ++z)
        for (std::int64_t y = 0; y < dims[1]; ++y)
            for (std::int64_t x = 0; x < dims[0]; ++x)
                out[x + dims[0] * (y + dims[1] * z)] =
                    at(x, y, z) && at(x - 1, y, z) && at(x + 1, y, z) && at(x, y - 1, z) &&
                    at(x, y + 1, z) && at(x, y, z - 1) && at(x, y, z + 1);
    return out;
}

// ---- closed-form simple linear regression ---------------------------------

struct SimpleOls {
    double intercept = 0.0;
    double slope = 0.0;
};

inline SimpleOls simple_ols(std::span<const double> x, std::span<const double> y) {
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const long double n = static_cast<long double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    SimpleOls fit;
    fit.slope = static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
    fit.intercept = static_cast<double>((sy - fit.slope * sx) / n);
    return fit;
}

}  // namespace oracles

#pragma once

#include <span>
#include <vector>

#include "habench/types.hpp"

namespace habench::stats {

struct AnovaResult {
    double f = 0.0;
    std::int64_t df_between = 0;
    std::int64_t df_within = 0;
    double p = 1.0;
    double ss_between = 0.0;
    double ss_within = 0.0;
    double ss_total = 0.0;
};

struct TTestResult {
    double t = 0.0;
    std::int64_t df = 0;
    double p = 1.0;  // two-sided
};

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation with the symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
double reg_inc_beta(double x, double a, double b);

/// Survival function of the F distribution, P(X > f).
double f_sf(double f, std::int64_t d1, std::int64_t d2);

/// One-sided upper-tail survival function of Student's t.
double t_sf(double t, std::int64_t df);

/// One-way ANOVA across groups. Zero-variance conventions: ss_within = 0
/// with ss_between > 0 gives F = +inf, p = 0; both zero gives F = 0, p = 1.
AnovaResult oneway_anova(const std::vector<std::span<const double>>& groups);

/// Between-group sum of squares over total; 0 when ss_total = 0.
double eta_squared(const AnovaResult& anova);

/// Pooled-variance two-sided Student's t-test.
TTestResult pairwise_t(std::span<const double> group_i, std::span<const double> group_j);

/// Small-sample-corrected standardized mean difference,
/// g = (1 - 3/(4 df - 1)) * (m_i - m_j) / s_p.
double hedges_g(std::span<const double> group_i, std::span<const double> group_j);

/// Per-test significance level alpha / m.
double bonferroni_threshold(double alpha, std::int64_t m);

}  // namespace habench::stats

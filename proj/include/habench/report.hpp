#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "habench/types.hpp"

namespace habench::report {

struct PairwiseRecord {
    std::int64_t voxel;   // column index into the masked dataset
    std::int64_t site_a;  // indices into SiteEffectReport::sites
    std::int64_t site_b;
    double t;
    double p;
    bool significant;
    std::optional<double> hedges_g;  // absent when pooled variance is zero
};

struct ReportSummary {
    std::int64_t voxels = 0;       // V
    std::int64_t sites = 0;        // S
    std::int64_t pairs = 0;        // P = S(S-1)/2
    double alpha = 0.05;
    double f_threshold = 0.0;      // alpha / V
    double t_threshold = 0.0;      // alpha / (V * P)
    std::int64_t n_f = 0;
    double f_f = 0.0;
    std::optional<std::int64_t> n_t;  // null when n_f = 0
    double f_t = 0.0;
};

struct SiteEffectReport {
    std::vector<std::string> sites;
    Vector f_stat;       // V
    Vector p_f;          // V
    Vector eta2;         // V
    Vector t_fraction;   // V, 0 where ANOVA not significant
    std::vector<bool> significant_f;
    std::vector<PairwiseRecord> pairwise;  // only ANOVA-significant voxels
    ReportSummary summary;
};

/// Voxel-wise site-effect analysis: one-way ANOVA with Bonferroni
/// threshold alpha/V, pairwise t-tests at significant voxels with
/// threshold alpha/(V*P), eta-squared and Hedges' g effect sizes.
SiteEffectReport generate_report(const VoxelDataset& dataset, double alpha, int workers = 0);

/// Write sig_F.nii.gz, eta2.nii.gz and t_fraction.nii.gz with the
/// report values embedded in full geometry (background 0).
void emit_maps(const SiteEffectReport& report, const Mask& mask,
               const std::filesystem::path& output_dir);

/// Write anova.csv, pairwise.csv and summary.json.
void emit_tables(const SiteEffectReport& report, const std::filesystem::path& output_dir);

/// Equal-width histogram of eta-squared over all voxels on [0, 1];
/// written as eta2_hist.csv.
std::vector<std::int64_t> eta2_distribution(const SiteEffectReport& report, int n_bins);
void emit_eta2_histogram(const SiteEffectReport& report, int n_bins,
                         const std::filesystem::path& output_dir);

std::string summary_to_json(const ReportSummary& summary);
ReportSummary summary_from_json(const std::string& json_text);
ReportSummary read_summary(const std::filesystem::path& path);

/// Side-by-side n_F / f_F / n_t table; n_t renders as N/A when n_F = 0.
std::string compare_reports(const std::vector<std::pair<std::string, ReportSummary>>& reports);

}  // namespace habench::report

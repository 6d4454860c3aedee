#include "habench/report.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "habench/core.hpp"
#include "habench/nifti.hpp"
#include "habench/parallel.hpp"
#include "habench/stats.hpp"

namespace habench::report {

namespace {

std::string format_double(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw Error("write failure: " + path.string());
}

}  // namespace

SiteEffectReport generate_report(const VoxelDataset& dataset, double alpha, int workers) {
    dataset.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha outside (0, 1)");
    const std::int64_t s = dataset.layout.site_count();
    const std::int64_t v = dataset.n_voxels();
    if (s < 2) throw Error("report needs at least 2 sites");
    for (std::int64_t i = 0; i < s; ++i)
        if (dataset.layout.counts[i] < 2)
            throw Error("site with fewer than 2 images: " + dataset.layout.sites[i]);

    const std::int64_t pairs = s * (s - 1) / 2;
    const double f_threshold = stats::bonferroni_threshold(alpha, v);
    const double t_threshold = stats::bonferroni_threshold(alpha, v * pairs);

    std::vector<std::vector<std::int64_t>> site_rows(s);
    for (std::int64_t i = 0; i < s; ++i) site_rows[i] = dataset.layout.rows_of(i);

    SiteEffectReport rep;
    rep.sites = dataset.layout.sites;
    rep.f_stat.resize(v);
    rep.p_f.resize(v);
    rep.eta2.resize(v);
    rep.t_fraction = Vector::Zero(v);
    rep.significant_f.assign(v, false);
    std::vector<std::vector<PairwiseRecord>> per_voxel_pairs(v);

    parallel_for(
        v,
        [&](std::int64_t c) {
            std::vector<std::vector<double>> groups(s);
            std::vector<std::span<const double>> views;
            for (std::int64_t i = 0; i < s; ++i) {
                groups[i].reserve(site_rows[i].size());
                for (auto r : site_rows[i]) groups[i].push_back(dataset.values(r, c));
                views.emplace_back(groups[i]);
            }
            const auto anova = stats::oneway_anova(views);
            rep.f_stat[c] = anova.f;
            rep.p_f[c] = anova.p;
            rep.eta2[c] = stats::eta_squared(anova);
            if (anova.p < f_threshold) {
                rep.significant_f[c] = true;
                std::int64_t significant_pairs = 0;
                for (std::int64_t i = 0; i < s; ++i)
                    for (std::int64_t j = i + 1; j < s; ++j) {
                        const auto t = stats::pairwise_t(views[i], views[j]);
                        PairwiseRecord record{c, i, j, t.t, t.p, t.p < t_threshold, std::nullopt};
                        if (record.significant) {
                            ++significant_pairs;
                            try {
                                record.hedges_g = stats::hedges_g(views[i], views[j]);
                            } catch (const Error&) {
                                // zero pooled variance: effect size undefined
                            }
                        }
                        per_voxel_pairs[c].push_back(record);
                    }
                rep.t_fraction[c] = static_cast<double>(significant_pairs) / pairs;
            }
        },
        workers);

    std::int64_t n_f = 0;
    std::int64_t n_t = 0;
    for (std::int64_t c = 0; c < v; ++c) {
        if (rep.significant_f[c]) ++n_f;
        for (auto& record : per_voxel_pairs[c]) {
            if (record.significant) ++n_t;
            rep.pairwise.push_back(std::move(record));
        }
    }

    rep.summary.voxels = v;
    rep.summary.sites = s;
    rep.summary.pairs = pairs;
    rep.summary.alpha = alpha;
    rep.summary.f_threshold = f_threshold;
    rep.summary.t_threshold = t_threshold;
    rep.summary.n_f = n_f;
    rep.summary.f_f = static_cast<double>(n_f) / static_cast<double>(v);
    if (n_f > 0) {
        rep.summary.n_t = n_t;
        rep.summary.f_t = static_cast<double>(n_t) / static_cast<double>(n_f * pairs);
    }
    return rep;
}

void emit_maps(const SiteEffectReport& report, const Mask& mask,
               const std::filesystem::path& output_dir) {
    if (report.summary.voxels != mask.voxel_count())
        throw Error("report voxel count does not match mask");
    std::filesystem::create_directories(output_dir);

    Vector sig(report.summary.voxels);
    for (std::int64_t c = 0; c < report.summary.voxels; ++c)
        sig[c] = report.significant_f[c] ? 1.0 : 0.0;

    nifti::write_volume(embed_row(sig, mask), output_dir / "sig_F.nii.gz",
                        nifti::ElementType::Float32);
    nifti::write_volume(embed_row(report.eta2, mask), output_dir / "eta2.nii.gz",
                        nifti::ElementType::Float32);
    nifti::write_volume(embed_row(report.t_fraction, mask), output_dir / "t_fraction.nii.gz",
                        nifti::ElementType::Float32);
}

std::string summary_to_json(const ReportSummary& summary) {
    nlohmann::json doc;
    doc["V"] = summary.voxels;
    doc["S"] = summary.sites;
    doc["P"] = summary.pairs;
    doc["alpha"] = summary.alpha;
    doc["f_threshold"] = summary.f_threshold;
    doc["t_threshold"] = summary.t_threshold;
    doc["n_F"] = summary.n_f;
    doc["f_F"] = summary.f_f;
    if (summary.n_t)
        doc["n_t"] = *summary.n_t;
    else
        doc["n_t"] = nullptr;
    doc["f_t"] = summary.f_t;
    return doc.dump(2) + "\n";
}

ReportSummary summary_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("summary parse error: ") + e.what());
    }
    ReportSummary summary;
    summary.voxels = doc.at("V");
    summary.sites = doc.at("S");
    summary.pairs = doc.at("P");
    summary.alpha = doc.at("alpha");
    summary.f_threshold = doc.at("f_threshold");
    summary.t_threshold = doc.at("t_threshold");
    summary.n_f = doc.at("n_F");
    summary.f_f = doc.at("f_F");
    if (!doc.at("n_t").is_null()) summary.n_t = doc.at("n_t").get<std::int64_t>();
    summary.f_t = doc.at("f_t");
    return summary;
}

ReportSummary read_summary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open summary: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return summary_from_json(text);
}

void emit_tables(const SiteEffectReport& report, const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);

    std::string anova = "voxel_index,F,p,significant,eta2\n";
    for (std::int64_t c = 0; c < report.summary.voxels; ++c) {
        anova += std::to_string(c) + ',' + format_double(report.f_stat[c]) + ',' +
                 format_double(report.p_f[c]) + ',' + (report.significant_f[c] ? "1" : "0") + ',' +
                 format_double(report.eta2[c]) + '\n';
    }
    write_text(output_dir / "anova.csv", anova);

    std::string pairwise = "voxel_index,site_a,site_b,t,p,significant,hedges_g\n";
    for (const auto& record : report.pairwise) {
        pairwise += std::to_string(record.voxel) + ',' + report.sites[record.site_a] + ',' +
                    report.sites[record.site_b] + ',' + format_double(record.t) + ',' +
                    format_double(record.p) + ',' + (record.significant ? "1" : "0") + ',' +
                    (record.hedges_g ? format_double(*record.hedges_g) : std::string()) + '\n';
    }
    write_text(output_dir / "pairwise.csv", pairwise);

    write_text(output_dir / "summary.json", summary_to_json(report.summary));
}

std::vector<std::int64_t> eta2_distribution(const SiteEffectReport& report, int n_bins) {
    if (n_bins < 1) throw Error("n_bins must be >= 1");
    std::vector<std::int64_t> counts(n_bins, 0);
    for (std::int64_t c = 0; c < report.summary.voxels; ++c) {
        int bin = static_cast<int>(report.eta2[c] * n_bins);
        if (bin >= n_bins) bin = n_bins - 1;  // eta2 == 1 falls in the last bin
        if (bin < 0) bin = 0;
        ++counts[bin];
    }
    return counts;
}

void emit_eta2_histogram(const SiteEffectReport& report, int n_bins,
                         const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);
    const auto counts = eta2_distribution(report, n_bins);
    std::string csv = "bin_low,bin_high,count\n";
    for (int b = 0; b < n_bins; ++b) {
        csv += format_double(static_cast<double>(b) / n_bins) + ',' +
               format_double(static_cast<double>(b + 1) / n_bins) + ',' +
               std::to_string(counts[b]) + '\n';
    }
    write_text(output_dir / "eta2_hist.csv", csv);
}

std::string compare_reports(const std::vector<std::pair<std::string, ReportSummary>>& reports) {
    if (reports.empty()) throw Error("no reports to compare");
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].second.voxels != reports[0].second.voxels)
            throw Error("reports disagree on voxel count");
        if (reports[i].second.sites != reports[0].second.sites)
            throw Error("reports disagree on site count");
    }
    std::string csv = "label,n_F,f_F,n_t\n";
    for (const auto& [label, summary] : reports) {
        csv += label + ',' + std::to_string(summary.n_f) + ',' + format_double(summary.f_f) + ',' +
               (summary.n_t ? std::to_string(*summary.n_t) : std::string("N/A")) + '\n';
    }
    return csv;
}

}  // namespace habench::report

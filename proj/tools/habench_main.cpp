#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "habench/core.hpp"
#include "habench/harmonize.hpp"
#include "habench/nifti.hpp"
#include "habench/parallel.hpp"
#include "habench/report.hpp"
#include "habench/stats.hpp"
#include "habench/synth.hpp"
#include "habench/tabular.hpp"

namespace fs = std::filesystem;
using namespace habench;

namespace {

Mask read_mask(const fs::path& path) {
    const Volume vol = nifti::read_volume(path);
    std::vector<bool> flags(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) flags[i] = vol.data[i] != 0.0;
    Mask mask = Mask::from_flags(vol.geometry, std::move(flags));
    return mask;
}

/// Covariate kinds are not declared in the run config; a column whose
/// values all parse as numbers is treated as continuous.
tabular::TableSchema infer_schema(const fs::path& table_path,
                                  const std::vector<std::string>& covariate_names) {
    tabular::TableSchema schema;
    if (covariate_names.empty()) return schema;
    const auto rows = tabular::read_csv(table_path);
    const auto& header = rows.front();
    for (const auto& name : covariate_names) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw Error("missing column '" + name + "' in " + table_path.string());
        const std::size_t col = it - header.begin();
        bool numeric = true;
        for (std::size_t r = 1; r < rows.size() && numeric; ++r) {
            if (col >= rows[r].size()) continue;
            const std::string& value = rows[r][col];
            std::size_t pos = 0;
            try {
                std::stod(value, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            numeric = !value.empty() && pos == value.size();
        }
        schema.covariates.push_back({name, !numeric});
    }
    return schema;
}

struct LoadedData {
    VoxelDataset dataset;
    std::vector<std::pair<std::string, Volume>> volumes;
};

LoadedData load_dataset(const fs::path& table_path, const fs::path& mask_path,
                        const tabular::TableSchema& schema) {
    LoadedData data;
    const Mask mask = read_mask(mask_path);
    const SampleTable table = tabular::read_sample_table(table_path, schema);
    for (const auto& row : table.rows) {
        const fs::path image = tabular::resolve_image_path(table_path, row.image_id);
        data.volumes.emplace_back(row.image_id, nifti::read_volume(image));
    }
    data.dataset = assemble_dataset(data.volumes, mask, table);
    return data;
}

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
    const synth::SynthSpec spec = synth::read_synth_spec(spec_path);
    const synth::SynthBundle bundle = synth::generate(spec);
    // Stage into a sibling temp dir so a failure leaves no partial bundle.
    const fs::path staging = out_dir.parent_path().empty()
                                 ? fs::path(out_dir.string() + ".tmp")
                                 : out_dir.parent_path() / (out_dir.filename().string() + ".tmp");
    fs::remove_all(staging);
    synth::write_synth_bundle(bundle, staging);
    fs::remove_all(out_dir);
    fs::rename(staging, out_dir);
    return 0;
}

int cmd_harmonize(const fs::path& table_path, const fs::path& mask_path,
                  const fs::path& config_path, const fs::path& out_dir) {
    const tabular::RunConfig config = tabular::read_run_config(config_path);
    const tabular::TableSchema schema = infer_schema(table_path, config.covariate_names);
    LoadedData data = load_dataset(table_path, mask_path, schema);

    std::vector<CovariateSpec> covariates;
    for (const auto& c : schema.covariates) covariates.push_back(c);
    const DesignMatrix design = build_design_matrix(data.dataset.table, covariates);

    harmonize::MethodOptions options;
    options.combat_eb = config.combat_eb;
    options.combat_tol = config.combat_tol;
    options.combat_max_iter = config.combat_max_iter;
    const auto result =
        harmonize::lookup_method(config.method).run(data.dataset, design, options);

    fs::create_directories(out_dir);
    // Full volumes go out with unmasked voxels copied through unmodified.
    for (std::int64_t r = 0; r < data.dataset.n_images(); ++r) {
        const auto& [id, input] = data.volumes[r];
        Volume output = input;
        for (std::int64_t k = 0; k < data.dataset.mask.voxel_count(); ++k)
            output.data[data.dataset.mask.voxel_index[k]] = result.adjusted(r, k);
        nifti::write_volume(output, out_dir / id, nifti::ElementType::Float64);
    }
    std::ofstream model(out_dir / "model.json", std::ios::binary);
    model << result.model_json << "\n";
    fs::copy_file(table_path, out_dir / "samples.csv", fs::copy_options::overwrite_existing);
    return 0;
}

int cmd_report(const fs::path& table_path, const fs::path& mask_path, double alpha,
               const fs::path& out_dir, int bins, int threads) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha outside (0, 1)");
    LoadedData data = load_dataset(table_path, mask_path, tabular::TableSchema{});
    const auto rep = report::generate_report(data.dataset, alpha, threads);
    report::emit_tables(rep, out_dir);
    report::emit_maps(rep, data.dataset.mask, out_dir);
    report::emit_eta2_histogram(rep, bins, out_dir);
    return 0;
}

int cmd_compare(const std::vector<std::string>& labeled_dirs, const fs::path& out_dir) {
    std::vector<std::pair<std::string, report::ReportSummary>> summaries;
    for (const auto& entry : labeled_dirs) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw Error("expected label=dir, got: " + entry);
        const std::string label = entry.substr(0, eq);
        const fs::path dir = entry.substr(eq + 1);
        summaries.emplace_back(label, report::read_summary(dir / "summary.json"));
    }
    const std::string table = report::compare_reports(summaries);
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "comparison.csv", std::ios::binary);
    if (!out) throw Error("cannot write comparison.csv");
    out << table;
    std::cout << table;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Harmonization benchmarking toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker count (default: HABENCH_THREADS or all cores)");

    std::string spec_path, table_path, mask_path, config_path, out_dir;
    double alpha = 0.05;
    int bins = 50;
    std::vector<std::string> report_dirs;

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic multi-site bundle");
    synth_cmd->add_option("--spec", spec_path, "spec JSON")->required();
    synth_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* harmonize_cmd = app.add_subcommand("harmonize", "fit and apply a harmonization method");
    harmonize_cmd->add_option("--table", table_path, "sample table CSV")->required();
    harmonize_cmd->add_option("--mask", mask_path, "mask volume")->required();
    harmonize_cmd->add_option("--config", config_path, "run config JSON")->required();
    harmonize_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "generate the site-effect report");
    report_cmd->add_option("--table", table_path, "sample table CSV")->required();
    report_cmd->add_option("--mask", mask_path, "mask volume")->required();
    report_cmd->add_option("--alpha", alpha, "significance level");
    report_cmd->add_option("--bins", bins, "eta-squared histogram bins");
    report_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* compare_cmd = app.add_subcommand("compare", "compare report summaries");
    compare_cmd->add_option("--reports", report_dirs, "label=dir pairs")->required();
    compare_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) return cmd_synth(spec_path, out_dir);
        if (harmonize_cmd->parsed()) return cmd_harmonize(table_path, mask_path, config_path, out_dir);
        if (report_cmd->parsed()) return cmd_report(table_path, mask_path, alpha, out_dir, bins, threads);
        if (compare_cmd->parsed()) return cmd_compare(report_dirs, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

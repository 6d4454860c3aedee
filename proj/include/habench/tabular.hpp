#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "habench/core.hpp"
#include "habench/types.hpp"

namespace habench::tabular {

struct TableSchema {
    std::string image_column = "image";
    std::string site_column = "site";
    std::vector<CovariateSpec> covariates;

    void validate() const;
};

/// Parse a CSV covariate table against a schema. Image paths in the
/// table are kept as written; resolve_image_path joins them with the
/// table file's directory.
SampleTable read_sample_table(const std::filesystem::path& path, const TableSchema& schema);

std::filesystem::path resolve_image_path(const std::filesystem::path& table_path,
                                         const std::string& image_id);

struct RunConfig {
    std::string method = "none";
    std::vector<std::string> covariate_names;
    double alpha = 0.05;
    bool combat_eb = true;
    double combat_tol = 1e-4;
    int combat_max_iter = 100;
    std::string output_dir;
};

/// Parse a flat JSON run configuration.
RunConfig read_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text);

/// RFC-4180-style CSV reader; returns rows of fields, header included.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace habench::tabular

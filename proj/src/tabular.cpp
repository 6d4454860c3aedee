#include "habench/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "habench/harmonize.hpp"

namespace habench::tabular {

namespace {

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw Error("unterminated quote on line " + std::to_string(line_no));
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open table: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;  // trailing newline
        rows.push_back(parse_csv_line(line, line_no));
    }
    if (rows.empty()) throw Error("empty table: " + path.string());
    return rows;
}

void TableSchema::validate() const {
    std::set<std::string> names{image_column, site_column};
    if (names.size() != 2) throw Error("schema image and site columns must differ");
    for (const auto& c : covariates)
        if (!names.insert(c.name).second)
            throw Error("schema column listed twice: " + c.name);
}

SampleTable read_sample_table(const std::filesystem::path& path, const TableSchema& schema) {
    schema.validate();
    const auto rows = read_csv(path);
    const auto& header = rows.front();

    auto column_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error("missing column '" + name + "' in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t image_col = column_of(schema.image_column);
    const std::size_t site_col = column_of(schema.site_column);
    std::vector<std::size_t> cov_cols;
    for (const auto& c : schema.covariates) cov_cols.push_back(column_of(c.name));

    SampleTable table;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        if (fields.size() != header.size())
            throw Error("row " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(header.size()));
        auto cell = [&](std::size_t col, const std::string& name) {
            const std::string& value = fields[col];
            if (value.empty())
                throw Error("empty cell at row " + std::to_string(r + 1) + ", column '" + name +
                            "'");
            return value;
        };
        SampleRow row;
        row.image_id = cell(image_col, schema.image_column);
        row.site = cell(site_col, schema.site_column);
        for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
            const auto& spec = schema.covariates[c];
            const std::string value = cell(cov_cols[c], spec.name);
            if (!spec.categorical) {
                std::size_t pos = 0;
                double parsed = 0.0;
                bool ok = true;
                try {
                    parsed = std::stod(value, &pos);
                } catch (const std::exception&) {
                    ok = false;
                }
                if (!ok || pos != value.size() || !std::isfinite(parsed))
                    throw Error("unparseable number '" + value + "' at row " +
                                std::to_string(r + 1) + ", column '" + spec.name + "'");
            }
            row.covariates[spec.name] = value;
        }
        table.rows.push_back(std::move(row));
    }
    table.validate();
    return table;
}

std::filesystem::path resolve_image_path(const std::filesystem::path& table_path,
                                         const std::string& image_id) {
    std::filesystem::path image(image_id);
    if (image.is_absolute()) return image;
    return table_path.parent_path() / image;
}

RunConfig parse_run_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object()) throw Error("config must be a JSON object");

    static const std::set<std::string> known = {"method",     "covariates",      "alpha",
                                               "combat_eb",  "combat_tol",      "combat_max_iter",
                                               "output_dir"};
    for (const auto& [key, _] : doc.items())
        if (!known.count(key)) throw Error("unknown config key: " + key);

    RunConfig config;
    config.method = doc.value("method", "none");
    if (!harmonize::method_registered(config.method)) {
        std::string available;
        for (const auto& name : harmonize::registered_method_names())
            available += (available.empty() ? "" : ", ") + name;
        throw Error("unknown method '" + config.method + "'; available: " + available);
    }
    if (doc.contains("covariates")) {
        if (!doc["covariates"].is_array()) throw Error("config covariates must be an array");
        for (const auto& name : doc["covariates"]) config.covariate_names.push_back(name);
    }
    config.alpha = doc.value("alpha", 0.05);
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw Error("alpha outside (0, 1)");
    config.combat_eb = doc.value("combat_eb", true);
    config.combat_tol = doc.value("combat_tol", 1e-4);
    config.combat_max_iter = doc.value("combat_max_iter", 100);
    config.output_dir = doc.value("output_dir", "");
    return config;
}

RunConfig read_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

}  // namespace habench::tabular

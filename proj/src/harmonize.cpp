#include "habench/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <json.hpp>

#include "habench/core.hpp"

namespace habench::harmonize {

namespace {
constexpr double kMinScale = 1e-8;
constexpr double kVarianceFloor = 1e-12;
}  // namespace

GlobalScalingFit fit_global_scaling(const VoxelDataset& dataset) {
    dataset.validate();
    const std::int64_t s = dataset.layout.site_count();
    const std::int64_t v = dataset.n_voxels();
    if (s < 2) throw Error("global scaling needs at least 2 sites");
    if (v < 2) throw Error("global scaling needs at least 2 voxels");

    const SiteMeans means = site_means(dataset);
    const double grand_mean = means.grand.mean();
    const Vector centered = means.grand.array() - grand_mean;
    const double sxx = centered.squaredNorm();
    if (sxx < 1e-24) throw Error("zero regressor variance: grand-mean image is constant");

    GlobalScalingFit fit;
    fit.sites = dataset.layout.sites;
    double residual_ss = 0.0;
    for (std::int64_t i = 0; i < s; ++i) {
        const Vector site = means.per_site.row(i).transpose();
        const double site_mean = site.mean();
        const double slope = centered.dot(site - Vector::Constant(v, site_mean)) / sxx;
        const double intercept = site_mean - slope * grand_mean;
        if (std::abs(slope) < kMinScale)
            throw Error("global scaling slope below minimum magnitude for site " + fit.sites[i]);
        fit.theta_loc.push_back(intercept);
        fit.theta_scl.push_back(slope);
        residual_ss += (site.array() - intercept - slope * means.grand.array()).square().sum();
    }
    fit.sigma2 = residual_ss / static_cast<double>(s * v);
    return fit;
}

Matrix apply_global_scaling(const GlobalScalingFit& fit, const VoxelDataset& dataset) {
    dataset.validate();
    std::vector<std::int64_t> site_to_fit(dataset.layout.site_count());
    for (std::int64_t i = 0; i < dataset.layout.site_count(); ++i) {
        auto it = std::find(fit.sites.begin(), fit.sites.end(), dataset.layout.sites[i]);
        if (it == fit.sites.end())
            throw Error("site not in fitted model: " + dataset.layout.sites[i]);
        site_to_fit[i] = it - fit.sites.begin();
    }
    Matrix out(dataset.n_images(), dataset.n_voxels());
    for (std::int64_t r = 0; r < dataset.n_images(); ++r) {
        const std::int64_t f = site_to_fit[dataset.layout.membership[r]];
        out.row(r) = (dataset.values.row(r).array() - fit.theta_loc[f]) / fit.theta_scl[f];
    }
    return out;
}

CombatFit fit_combat(const VoxelDataset& dataset, const DesignMatrix& design, bool eb, double tol,
                     int max_iter) {
    dataset.validate();
    const std::int64_t n = dataset.n_images();
    const std::int64_t v = dataset.n_voxels();
    const std::int64_t s = dataset.layout.site_count();
    const std::int64_t k = design.n_columns();
    if (k > 0 && design.values.rows() != n)
        throw Error("design row count does not match dataset");
    if (n <= k + s) throw Error("not estimable: need N > K + S");
    for (std::int64_t i = 0; i < s; ++i)
        if (dataset.layout.counts[i] < 2)
            throw Error("site with fewer than 2 images: " + dataset.layout.sites[i]);

    // One-hot site indicators plus covariates; identical across voxels,
    // so the normal-equation solve is shared.
    Matrix full(n, s + k);
    full.setZero();
    for (std::int64_t r = 0; r < n; ++r) full(r, dataset.layout.membership[r]) = 1.0;
    if (k > 0) full.rightCols(k) = design.values;

    Eigen::ColPivHouseholderQR<Matrix> qr(full);
    qr.setThreshold(1e-10);
    if (qr.rank() < s + k)
        throw Error("not estimable: site indicators and covariates are collinear");
    const Matrix coef = qr.solve(dataset.values);  // (S+K) x V

    CombatFit fit;
    fit.sites = dataset.layout.sites;
    fit.design_columns = design.columns;
    fit.eb_used = eb;

    // Site intercepts b_i decompose into a count-weighted grand intercept
    // and constrained site effects with sum_i n_i gamma_i = 0.
    Vector weights(s);
    for (std::int64_t i = 0; i < s; ++i)
        weights[i] = static_cast<double>(dataset.layout.counts[i]) / static_cast<double>(n);
    fit.alpha_hat = (weights.transpose() * coef.topRows(s)).transpose();
    fit.beta_hat = coef.bottomRows(k);

    // Residual variance with divisor N, then standardized data keeping
    // the site effect in.
    Matrix fitted = full * coef;
    Matrix residual = dataset.values - fitted;
    Vector sigma2 = residual.colwise().squaredNorm() / static_cast<double>(n);
    sigma2 = sigma2.cwiseMax(kVarianceFloor);
    fit.sigma_hat = sigma2.cwiseSqrt();

    Matrix z = dataset.values;
    z.rowwise() -= fit.alpha_hat.transpose();
    if (k > 0) z -= design.values * fit.beta_hat;
    for (std::int64_t c = 0; c < v; ++c) z.col(c) /= fit.sigma_hat[c];

    // Per-site location and (divisor-n) scale of the standardized data.
    Matrix gamma_z = Matrix::Zero(s, v);
    Matrix delta2 = Matrix::Zero(s, v);
    for (std::int64_t r = 0; r < n; ++r) gamma_z.row(dataset.layout.membership[r]) += z.row(r);
    for (std::int64_t i = 0; i < s; ++i)
        gamma_z.row(i) /= static_cast<double>(dataset.layout.counts[i]);
    for (std::int64_t r = 0; r < n; ++r) {
        const std::int64_t i = dataset.layout.membership[r];
        delta2.row(i) += (z.row(r) - gamma_z.row(i)).array().square().matrix();
    }
    for (std::int64_t i = 0; i < s; ++i)
        delta2.row(i) /= static_cast<double>(dataset.layout.counts[i]);
    delta2 = delta2.cwiseMax(kVarianceFloor);

    if (!eb) {
        fit.gamma_star = gamma_z;
        fit.delta_star = delta2.cwiseSqrt();
        return fit;
    }
    if (v < 2) throw Error("empirical Bayes needs at least 2 voxels");

    // Method-of-moments hyperparameters across voxels, then the
    // conditional EB update per voxel.
    fit.gamma_bar.resize(s);
    fit.tau2.resize(s);
    fit.a_prior.resize(s);
    fit.b_prior.resize(s);
    for (std::int64_t i = 0; i < s; ++i) {
        const double gm = gamma_z.row(i).mean();
        const double gv =
            (gamma_z.row(i).array() - gm).square().sum() / static_cast<double>(v - 1);
        const double m = delta2.row(i).mean();
        const double s2 =
            (delta2.row(i).array() - m).square().sum() / static_cast<double>(v - 1);
        if (s2 <= 0) throw Error("EB hyperparameters undefined: delta variance is zero");
        fit.gamma_bar[i] = gm;
        fit.tau2[i] = gv;
        fit.a_prior[i] = (2.0 * s2 + m * m) / s2;
        fit.b_prior[i] = (m * s2 + m * m * m) / s2;
        if (static_cast<double>(dataset.layout.counts[i]) / 2.0 + fit.a_prior[i] - 1.0 <= 0.0)
            throw Error("EB posterior denominator nonpositive for site " + fit.sites[i]);
    }

    fit.gamma_star = gamma_z;
    Matrix delta_star2 = delta2;
    for (std::int64_t i = 0; i < s; ++i) {
        const auto rows = dataset.layout.rows_of(i);
        const double n_i = static_cast<double>(rows.size());
        const double denom_df = n_i / 2.0 + fit.a_prior[i] - 1.0;
        for (std::int64_t c = 0; c < v; ++c) {
            double g = gamma_z(i, c);
            double d2 = delta2(i, c);
            double change = std::numeric_limits<double>::infinity();
            int iter = 0;
            while (change >= tol && iter < max_iter) {
                const double g_new = (n_i * fit.tau2[i] * gamma_z(i, c) + d2 * fit.gamma_bar[i]) /
                                     (n_i * fit.tau2[i] + d2);
                double ss = 0.0;
                for (auto r : rows) ss += (z(r, c) - g_new) * (z(r, c) - g_new);
                const double d2_new = (fit.b_prior[i] + 0.5 * ss) / denom_df;
                change = std::max(std::abs(g_new - g) / std::max(std::abs(g), 1e-12),
                                  std::abs(d2_new - d2) / std::max(std::abs(d2), 1e-12));
                g = g_new;
                d2 = d2_new;
                ++iter;
            }
            if (change >= tol)
                throw Error("EB iteration did not converge at voxel " + std::to_string(c) +
                            " for site " + fit.sites[i]);
            fit.gamma_star(i, c) = g;
            delta_star2(i, c) = std::max(d2, kVarianceFloor);
        }
    }
    fit.delta_star = delta_star2.cwiseSqrt();
    return fit;
}

Matrix apply_combat(const CombatFit& fit, const VoxelDataset& dataset,
                    const DesignMatrix& design) {
    dataset.validate();
    const std::int64_t n = dataset.n_images();
    const std::int64_t v = dataset.n_voxels();
    const std::int64_t k = static_cast<std::int64_t>(fit.design_columns.size());
    if (fit.alpha_hat.size() != v) throw Error("fit voxel count does not match dataset");
    if (design.n_columns() != k || (k > 0 && design.values.rows() != n))
        throw Error("design does not match fitted model");
    for (std::int64_t c = 0; c < k; ++c)
        if (design.columns[c].name != fit.design_columns[c].name)
            throw Error("design column mismatch: " + design.columns[c].name);

    std::vector<std::int64_t> site_to_fit(dataset.layout.site_count());
    for (std::int64_t i = 0; i < dataset.layout.site_count(); ++i) {
        auto it = std::find(fit.sites.begin(), fit.sites.end(), dataset.layout.sites[i]);
        if (it == fit.sites.end())
            throw Error("site not in fitted model: " + dataset.layout.sites[i]);
        site_to_fit[i] = it - fit.sites.begin();
    }

    Matrix covariate_part = Matrix::Zero(n, v);
    if (k > 0) covariate_part = design.values * fit.beta_hat;

    Matrix out(n, v);
    for (std::int64_t r = 0; r < n; ++r) {
        const std::int64_t f = site_to_fit[dataset.layout.membership[r]];
        for (std::int64_t c = 0; c < v; ++c) {
            const double z =
                (dataset.values(r, c) - fit.alpha_hat[c] - covariate_part(r, c)) / fit.sigma_hat[c];
            out(r, c) = fit.sigma_hat[c] * (z - fit.gamma_star(f, c)) / fit.delta_star(f, c) +
                        fit.alpha_hat[c] + covariate_part(r, c);
        }
    }
    return out;
}

Matrix identity_method(const VoxelDataset& dataset) { return dataset.values; }

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::int64_t r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::int64_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows) {
    const std::int64_t r = rows.size();
    const std::int64_t c = r > 0 ? rows[0].size() : 0;
    Matrix m(r, c);
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j) m(i, j) = rows[i][j];
    return m;
}

}  // namespace

std::string serialize_global_scaling(const GlobalScalingFit& fit) {
    nlohmann::json doc;
    doc["method"] = "global_scaling";
    doc["sites"] = fit.sites;
    doc["theta_loc"] = fit.theta_loc;
    doc["theta_scl"] = fit.theta_scl;
    doc["sigma2"] = fit.sigma2;
    return doc.dump(2);
}

GlobalScalingFit deserialize_global_scaling(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.value("method", "") != "global_scaling")
        throw Error("model document is not a global_scaling fit");
    GlobalScalingFit fit;
    fit.sites = doc.at("sites").get<std::vector<std::string>>();
    fit.theta_loc = doc.at("theta_loc").get<std::vector<double>>();
    fit.theta_scl = doc.at("theta_scl").get<std::vector<double>>();
    fit.sigma2 = doc.at("sigma2");
    return fit;
}

std::string serialize_combat(const CombatFit& fit) {
    nlohmann::json doc;
    doc["method"] = "combat";
    doc["sites"] = fit.sites;
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : fit.design_columns)
        cols.push_back({{"name", c.name},
                        {"kind", c.kind == ColumnKind::Continuous ? "continuous" : "dummy"}});
    doc["design_columns"] = std::move(cols);
    doc["alpha_hat"] = std::vector<double>(fit.alpha_hat.begin(), fit.alpha_hat.end());
    doc["beta_hat"] = matrix_to_json(fit.beta_hat);
    doc["sigma_hat"] = std::vector<double>(fit.sigma_hat.begin(), fit.sigma_hat.end());
    doc["gamma_star"] = matrix_to_json(fit.gamma_star);
    doc["delta_star"] = matrix_to_json(fit.delta_star);
    doc["eb_used"] = fit.eb_used;
    doc["gamma_bar"] = fit.gamma_bar;
    doc["tau2"] = fit.tau2;
    doc["a_prior"] = fit.a_prior;
    doc["b_prior"] = fit.b_prior;
    return doc.dump(2);
}

CombatFit deserialize_combat(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text);
    if (doc.value("method", "") != "combat") throw Error("model document is not a combat fit");
    CombatFit fit;
    fit.sites = doc.at("sites").get<std::vector<std::string>>();
    for (const auto& c : doc.at("design_columns"))
        fit.design_columns.push_back(
            {c.at("name"),
             c.at("kind") == "continuous" ? ColumnKind::Continuous : ColumnKind::Dummy});
    const auto alpha = doc.at("alpha_hat").get<std::vector<double>>();
    fit.alpha_hat = Eigen::Map<const Vector>(alpha.data(), alpha.size());
    fit.beta_hat = matrix_from_json(doc.at("beta_hat"));
    const auto sigma = doc.at("sigma_hat").get<std::vector<double>>();
    fit.sigma_hat = Eigen::Map<const Vector>(sigma.data(), sigma.size());
    fit.gamma_star = matrix_from_json(doc.at("gamma_star"));
    fit.delta_star = matrix_from_json(doc.at("delta_star"));
    fit.eb_used = doc.at("eb_used");
    fit.gamma_bar = doc.at("gamma_bar").get<std::vector<double>>();
    fit.tau2 = doc.at("tau2").get<std::vector<double>>();
    fit.a_prior = doc.at("a_prior").get<std::vector<double>>();
    fit.b_prior = doc.at("b_prior").get<std::vector<double>>();
    return fit;
}

namespace {

class IdentityMethod final : public HarmonizationMethod {
public:
    std::string name() const override { return "none"; }
    Result run(const VoxelDataset& dataset, const DesignMatrix&,
               const MethodOptions&) const override {
        return {identity_method(dataset), nlohmann::json{{"method", "none"}}.dump(2)};
    }
};

class GlobalScalingMethod final : public HarmonizationMethod {
public:
    std::string name() const override { return "global_scaling"; }
    Result run(const VoxelDataset& dataset, const DesignMatrix&,
               const MethodOptions&) const override {
        const GlobalScalingFit fit = fit_global_scaling(dataset);
        return {apply_global_scaling(fit, dataset), serialize_global_scaling(fit)};
    }
};

class CombatMethod final : public HarmonizationMethod {
public:
    std::string name() const override { return "combat"; }
    Result run(const VoxelDataset& dataset, const DesignMatrix& design,
               const MethodOptions& options) const override {
        const CombatFit fit = fit_combat(dataset, design, options.combat_eb, options.combat_tol,
                                         options.combat_max_iter);
        return {apply_combat(fit, dataset, design), serialize_combat(fit)};
    }
};

std::map<std::string, std::shared_ptr<HarmonizationMethod>>& registry() {
    static std::map<std::string, std::shared_ptr<HarmonizationMethod>> methods = {
        {"none", std::make_shared<IdentityMethod>()},
        {"global_scaling", std::make_shared<GlobalScalingMethod>()},
        {"combat", std::make_shared<CombatMethod>()},
    };
    return methods;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void register_method(const std::string& name, std::shared_ptr<HarmonizationMethod> method) {
    std::lock_guard lock(registry_mutex());
    if (!method) throw Error("register_method: null method");
    if (!registry().emplace(name, std::move(method)).second)
        throw Error("method already registered: " + name);
}

const HarmonizationMethod& lookup_method(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(name);
    if (it == registry().end()) {
        std::string available;
        for (const auto& [n, _] : registry()) available += (available.empty() ? "" : ", ") + n;
        throw Error("unknown method '" + name + "'; available: " + available);
    }
    return *it->second;
}

bool method_registered(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    return registry().count(name) > 0;
}

std::vector<std::string> registered_method_names() {
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [n, _] : registry()) names.push_back(n);
    return names;
}

}  // namespace habench::harmonize

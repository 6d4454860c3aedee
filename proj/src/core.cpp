#include "habench/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace habench {

void VolumeGeometry::validate() const {
    for (auto d : dims)
        if (d < 1) throw Error("geometry dims must all be >= 1");
    for (auto v : voxel_size)
        if (!(v > 0)) throw Error("voxel size must be positive");
    if (std::abs(affine.topLeftCorner<3, 3>().determinant()) < 1e-12)
        throw Error("affine upper-left 3x3 is singular");
}

void Volume::validate() const {
    geometry.validate();
    if (static_cast<std::int64_t>(data.size()) != geometry.voxel_count())
        throw Error("volume data length does not match geometry");
}

Mask Mask::from_flags(VolumeGeometry geometry, std::vector<bool> flags) {
    if (static_cast<std::int64_t>(flags.size()) != geometry.voxel_count())
        throw Error("mask flags length does not match geometry");
    Mask mask;
    mask.geometry = std::move(geometry);
    mask.flags = std::move(flags);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(mask.flags.size()); ++i)
        if (mask.flags[i]) mask.voxel_index.push_back(i);
    mask.validate();
    return mask;
}

void Mask::validate() const {
    geometry.validate();
    if (voxel_index.empty()) throw Error("empty mask");
    std::int64_t trues = 0;
    for (bool f : flags) trues += f ? 1 : 0;
    if (trues != voxel_count()) throw Error("mask voxel_index inconsistent with flags");
    for (std::size_t k = 1; k < voxel_index.size(); ++k)
        if (voxel_index[k] <= voxel_index[k - 1])
            throw Error("mask voxel_index not strictly increasing");
}

void SampleTable::validate() const {
    std::set<std::string> ids;
    std::set<std::string> names;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.image_id.empty()) throw Error("empty image_id in row " + std::to_string(r + 1));
        if (!ids.insert(row.image_id).second)
            throw Error("duplicate image_id: " + row.image_id);
        if (row.site.empty()) throw Error("empty site for image " + row.image_id);
        if (r == 0) {
            for (const auto& [name, _] : row.covariates) names.insert(name);
        } else {
            if (row.covariates.size() != names.size())
                throw Error("covariate name set differs for image " + row.image_id);
            for (const auto& [name, _] : row.covariates)
                if (!names.count(name))
                    throw Error("covariate name set differs for image " + row.image_id);
        }
    }
}

SiteLayout SiteLayout::from_table(const SampleTable& table) {
    SiteLayout layout;
    std::unordered_map<std::string, std::int64_t> index;
    for (const auto& row : table.rows) {
        auto it = index.find(row.site);
        std::int64_t i;
        if (it == index.end()) {
            i = static_cast<std::int64_t>(layout.sites.size());
            index.emplace(row.site, i);
            layout.sites.push_back(row.site);
            layout.counts.push_back(0);
        } else {
            i = it->second;
        }
        layout.membership.push_back(i);
        ++layout.counts[i];
    }
    if (layout.sites.empty()) throw Error("table has no rows");
    return layout;
}

std::int64_t SiteLayout::find_site(const std::string& label) const {
    for (std::size_t i = 0; i < sites.size(); ++i)
        if (sites[i] == label) return static_cast<std::int64_t>(i);
    return -1;
}

std::vector<std::int64_t> SiteLayout::rows_of(std::int64_t site) const {
    std::vector<std::int64_t> rows;
    for (std::size_t r = 0; r < membership.size(); ++r)
        if (membership[r] == site) rows.push_back(static_cast<std::int64_t>(r));
    return rows;
}

void VoxelDataset::validate() const {
    mask.validate();
    table.validate();
    if (values.rows() != table.size()) throw Error("dataset row count does not match table");
    if (values.cols() != mask.voxel_count()) throw Error("dataset column count does not match mask");
    if (!values.allFinite()) throw Error("dataset contains non-finite values");
}

VoxelDataset assemble_dataset(const std::vector<std::pair<std::string, Volume>>& volumes,
                              const Mask& mask, const SampleTable& table) {
    mask.validate();
    table.validate();

    std::unordered_map<std::string, const Volume*> by_id;
    for (const auto& [id, vol] : volumes) {
        if (!by_id.emplace(id, &vol).second) throw Error("duplicate volume image_id: " + id);
    }

    const std::int64_t n = table.size();
    const std::int64_t v = mask.voxel_count();
    VoxelDataset ds;
    ds.values.resize(n, v);
    ds.geometry = mask.geometry;
    ds.mask = mask;
    ds.table = table;
    ds.layout = SiteLayout::from_table(table);

    for (std::int64_t r = 0; r < n; ++r) {
        const auto& id = table.rows[r].image_id;
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("no volume for image_id: " + id);
        const Volume& vol = *it->second;
        vol.validate();
        if (!vol.geometry.same_dims(mask.geometry))
            throw Error("geometry mismatch for image " + id);
        for (std::int64_t k = 0; k < v; ++k) {
            double value = vol.data[mask.voxel_index[k]];
            if (!std::isfinite(value))
                throw Error("non-finite value in image " + id + " at voxel index " +
                            std::to_string(mask.voxel_index[k]));
            ds.values(r, k) = value;
        }
    }
    return ds;
}

DesignMatrix build_design_matrix(const SampleTable& table,
                                 const std::vector<CovariateSpec>& covariates) {
    table.validate();
    const std::int64_t n = table.size();

    DesignMatrix design;
    std::vector<std::vector<double>> cols;

    for (const auto& spec : covariates) {
        if (!table.rows.empty() && !table.rows[0].covariates.count(spec.name))
            throw Error("unknown covariate: " + spec.name);
        if (!spec.categorical) {
            std::vector<double> col(n);
            for (std::int64_t r = 0; r < n; ++r) {
                const auto& text = table.rows[r].covariates.at(spec.name);
                std::size_t pos = 0;
                double value;
                try {
                    value = std::stod(text, &pos);
                } catch (const std::exception&) {
                    throw Error("covariate " + spec.name + " is not numeric: '" + text + "'");
                }
                if (pos != text.size() || !std::isfinite(value))
                    throw Error("covariate " + spec.name + " is not a finite number: '" + text + "'");
                col[r] = value;
            }
            design.columns.push_back({spec.name, ColumnKind::Continuous});
            cols.push_back(std::move(col));
        } else {
            std::set<std::string> levels;
            for (const auto& row : table.rows) levels.insert(row.covariates.at(spec.name));
            bool first = true;  // lexicographically smallest level is the reference
            for (const auto& level : levels) {
                if (first) { first = false; continue; }
                std::vector<double> col(n);
                for (std::int64_t r = 0; r < n; ++r)
                    col[r] = table.rows[r].covariates.at(spec.name) == level ? 1.0 : 0.0;
                design.columns.push_back({spec.name + "=" + level, ColumnKind::Dummy});
                cols.push_back(std::move(col));
            }
        }
    }

    const std::int64_t k = static_cast<std::int64_t>(cols.size());
    design.values.resize(n, k);
    for (std::int64_t c = 0; c < k; ++c)
        for (std::int64_t r = 0; r < n; ++r) design.values(r, c) = cols[c][r];

    if (k > 0) {
        // Rank check includes the implicit intercept used by every model
        // downstream, so constant columns fail too.
        Matrix augmented(n, k + 1);
        augmented.col(0).setOnes();
        augmented.rightCols(k) = design.values;
        Eigen::ColPivHouseholderQR<Matrix> qr(augmented);
        qr.setThreshold(1e-10);
        if (qr.rank() < k + 1) throw Error("design matrix is rank deficient");
    }
    return design;
}

namespace {

Mask erode_once(const Mask& mask) {
    const auto& dims = mask.geometry.dims;
    auto idx = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        return x + dims[0] * (y + dims[1] * z);
    };
    std::vector<bool> out(mask.flags.size(), false);
    for (std::int64_t z = 0; z < dims[2]; ++z)
        for (std::int64_t y = 0; y < dims[1]; ++y)
            for (std::int64_t x = 0; x < dims[0]; ++x) {
                if (!mask.flags[idx(x, y, z)]) continue;
                bool keep = x > 0 && x < dims[0] - 1 && y > 0 && y < dims[1] - 1 &&
                            z > 0 && z < dims[2] - 1 && mask.flags[idx(x - 1, y, z)] &&
                            mask.flags[idx(x + 1, y, z)] && mask.flags[idx(x, y - 1, z)] &&
                            mask.flags[idx(x, y + 1, z)] && mask.flags[idx(x, y, z - 1)] &&
                            mask.flags[idx(x, y, z + 1)];
                out[idx(x, y, z)] = keep;
            }
    std::int64_t trues = 0;
    for (bool f : out) trues += f ? 1 : 0;
    if (trues == 0) throw Error("erosion produced an empty mask");
    return Mask::from_flags(mask.geometry, std::move(out));
}

}  // namespace

Mask erode_mask(const Mask& mask, int radius_voxels) {
    if (radius_voxels < 1) throw Error("erosion radius must be >= 1");
    Mask out = mask;
    for (int r = 0; r < radius_voxels; ++r) out = erode_once(out);
    return out;
}

SiteMeans site_means(const VoxelDataset& dataset) {
    const std::int64_t s = dataset.layout.site_count();
    const std::int64_t v = dataset.n_voxels();
    SiteMeans means;
    means.per_site = Matrix::Zero(s, v);
    for (std::int64_t r = 0; r < dataset.n_images(); ++r)
        means.per_site.row(dataset.layout.membership[r]) += dataset.values.row(r);
    for (std::int64_t i = 0; i < s; ++i)
        means.per_site.row(i) /= static_cast<double>(dataset.layout.counts[i]);
    means.grand = dataset.values.colwise().mean();
    return means;
}

Volume embed_row(const Eigen::Ref<const Vector>& row, const Mask& mask, double background) {
    if (row.size() != mask.voxel_count())
        throw Error("row length does not match mask voxel count");
    Volume vol;
    vol.geometry = mask.geometry;
    vol.data.assign(mask.geometry.voxel_count(), background);
    for (std::int64_t k = 0; k < mask.voxel_count(); ++k)
        vol.data[mask.voxel_index[k]] = row[k];
    return vol;
}

}  // namespace habench

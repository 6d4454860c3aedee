#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace habench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Error type for all validation and I/O failures in the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Image-space description: grid dimensions, voxel size and the
/// voxel-index-to-world affine.
struct VolumeGeometry {
    std::array<std::int64_t, 3> dims{1, 1, 1};
    std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
    Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();

    std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    bool same_dims(const VolumeGeometry& other) const { return dims == other.dims; }

    void validate() const;
};

/// A dense scalar volume. Data is stored as double regardless of the
/// on-disk element type, in x-fastest linear order.
struct Volume {
    VolumeGeometry geometry;
    std::vector<double> data;
    std::string description;

    double at(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return data[x + geometry.dims[0] * (y + geometry.dims[1] * z)];
    }
    double& at(std::int64_t x, std::int64_t y, std::int64_t z) {
        return data[x + geometry.dims[0] * (y + geometry.dims[1] * z)];
    }

    void validate() const;
};

/// Binary voxel selection. voxel_index lists the linear indices of the
/// selected voxels in ascending order (x fastest); this order fixes
/// column identity in every matrix downstream.
struct Mask {
    VolumeGeometry geometry;
    std::vector<bool> flags;
    std::vector<std::int64_t> voxel_index;

    static Mask from_flags(VolumeGeometry geometry, std::vector<bool> flags);

    std::int64_t voxel_count() const { return static_cast<std::int64_t>(voxel_index.size()); }
    void validate() const;
};

/// One row per image: identifier, site label and covariate values.
/// Covariate values are kept as strings; kind information lives in the
/// schema used to parse them.
struct SampleRow {
    std::string image_id;
    std::string site;
    std::map<std::string, std::string> covariates;
};

struct SampleTable {
    std::vector<SampleRow> rows;

    std::int64_t size() const { return static_cast<std::int64_t>(rows.size()); }
    void validate() const;
};

/// Site bookkeeping derived from a SampleTable: distinct labels in order
/// of first appearance, per-site counts and per-row site index.
struct SiteLayout {
    std::vector<std::string> sites;
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> membership;

    static SiteLayout from_table(const SampleTable& table);

    std::int64_t site_count() const { return static_cast<std::int64_t>(sites.size()); }
    std::int64_t find_site(const std::string& label) const;  // -1 if absent
    /// Row indices belonging to site i, in table order.
    std::vector<std::int64_t> rows_of(std::int64_t site) const;
};

/// The universal working representation: N images by V masked voxels.
struct VoxelDataset {
    Matrix values;  // N x V
    VolumeGeometry geometry;
    Mask mask;
    SampleTable table;
    SiteLayout layout;

    std::int64_t n_images() const { return values.rows(); }
    std::int64_t n_voxels() const { return values.cols(); }
    void validate() const;
};

enum class ColumnKind { Continuous, Dummy };

struct DesignColumn {
    std::string name;
    ColumnKind kind;
};

/// Numeric covariate encoding, no intercept column. Categorical
/// covariates are dummy-coded against the lexicographically smallest
/// level.
struct DesignMatrix {
    std::vector<DesignColumn> columns;
    Matrix values;  // N x K

    std::int64_t n_columns() const { return values.cols(); }
};

}  // namespace habench

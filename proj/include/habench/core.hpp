#pragma once

#include <string>
#include <utility>
#include <vector>

#include "habench/types.hpp"

namespace habench {

/// Extract masked voxels from a set of volumes into an N x V dataset.
/// Volumes are matched to table rows by image_id; all volumes must share
/// the mask's grid dimensions and be finite inside the mask.
VoxelDataset assemble_dataset(const std::vector<std::pair<std::string, Volume>>& volumes,
                              const Mask& mask, const SampleTable& table);

struct CovariateSpec {
    std::string name;
    bool categorical = false;
};

/// Build the covariate design matrix (no intercept). Continuous values
/// are copied as-is; categorical levels are dummy-coded dropping the
/// lexicographically smallest level. Errors if [1 | X] is rank deficient.
DesignMatrix build_design_matrix(const SampleTable& table,
                                 const std::vector<CovariateSpec>& covariates);

/// Binary erosion with the 6-connected structuring element, applied
/// radius_voxels times. Errors if the result is empty.
Mask erode_mask(const Mask& mask, int radius_voxels);

struct SiteMeans {
    Matrix per_site;   // S x V
    Vector grand;      // V (mean over all N images, unweighted by site)
};

SiteMeans site_means(const VoxelDataset& dataset);

/// Scatter one dataset row back into a full volume; voxels outside the
/// mask take `background`.
Volume embed_row(const Eigen::Ref<const Vector>& row, const Mask& mask, double background = 0.0);

}  // namespace habench

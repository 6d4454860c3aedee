#pragma once

#include <memory>
#include <string>
#include <vector>

#include "habench/types.hpp"

namespace habench::harmonize {

/// Per-site affine transform fit by regressing site-mean images on the
/// grand-mean image; one transform per site, shared by all voxels.
struct GlobalScalingFit {
    std::vector<std::string> sites;
    std::vector<double> theta_loc;
    std::vector<double> theta_scl;
    double sigma2 = 0.0;
};

GlobalScalingFit fit_global_scaling(const VoxelDataset& dataset);
Matrix apply_global_scaling(const GlobalScalingFit& fit, const VoxelDataset& dataset);

/// Location-scale batch model parameters. gamma_star/delta_star are the
/// adjusted per-site, per-voxel effects (shrunken when eb_used).
struct CombatFit {
    std::vector<std::string> sites;
    std::vector<DesignColumn> design_columns;
    Vector alpha_hat;   // V
    Matrix beta_hat;    // K x V
    Vector sigma_hat;   // V, positive
    Matrix gamma_star;  // S x V
    Matrix delta_star;  // S x V, positive
    bool eb_used = false;
    // Per-site empirical-Bayes hyperparameters (empty when eb_used is false).
    std::vector<double> gamma_bar, tau2, a_prior, b_prior;
};

CombatFit fit_combat(const VoxelDataset& dataset, const DesignMatrix& design, bool eb,
                     double tol = 1e-4, int max_iter = 100);
Matrix apply_combat(const CombatFit& fit, const VoxelDataset& dataset,
                    const DesignMatrix& design);

Matrix identity_method(const VoxelDataset& dataset);

std::string serialize_global_scaling(const GlobalScalingFit& fit);
GlobalScalingFit deserialize_global_scaling(const std::string& json_text);
std::string serialize_combat(const CombatFit& fit);
CombatFit deserialize_combat(const std::string& json_text);

struct MethodOptions {
    bool combat_eb = true;
    double combat_tol = 1e-4;
    int combat_max_iter = 100;
};

/// A harmonization method as seen by the driver: fit on a dataset plus
/// design, produce the adjusted matrix and a serialized model document.
class HarmonizationMethod {
public:
    virtual ~HarmonizationMethod() = default;
    virtual std::string name() const = 0;
    struct Result {
        Matrix adjusted;  // N x V
        std::string model_json;
    };
    virtual Result run(const VoxelDataset& dataset, const DesignMatrix& design,
                       const MethodOptions& options) const = 0;
};

/// Register a custom method; errors on duplicate names. Built-ins
/// (none, global_scaling, combat) are registered at startup.
void register_method(const std::string& name, std::shared_ptr<HarmonizationMethod> method);
const HarmonizationMethod& lookup_method(const std::string& name);
bool method_registered(const std::string& name);
std::vector<std::string> registered_method_names();

}  // namespace habench::harmonize

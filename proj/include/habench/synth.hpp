#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "habench/types.hpp"

namespace habench::synth {

struct SiteSpec {
    std::string label;
    std::int64_t n_images = 0;
    double gamma_scale = 0.0;   // SD of the per-voxel site shift
    double site_offset = 0.0;   // site-wide additive shift over the mask
    double delta_scale = 1.0;   // fixed per-site scale factor at affected voxels
};

struct MaskShape {
    enum class Kind { Full, CenteredBox } kind = Kind::Full;
    double fraction = 1.0;  // edge fraction for the centered box
};

struct CovariateSpecs {
    std::array<double, 2> age_range{8.0, 12.0};
    double age_effect = 0.0;  // SD of the per-voxel age slope
    double sex_effect = 0.0;  // SD of the per-voxel sex effect
};

struct SynthSpec {
    std::uint64_t seed = 0;
    std::array<std::int64_t, 3> dims{8, 8, 8};
    MaskShape mask_shape;
    std::vector<SiteSpec> sites;
    CovariateSpecs covariates;
    double noise_sd = 0.05;
    double affected_fraction = 0.0;

    void validate() const;
};

SynthSpec parse_synth_spec(const std::string& json_text);
SynthSpec read_synth_spec(const std::filesystem::path& path);

/// Generative ground truth over masked voxels; columns follow mask
/// voxel order. gamma = 0 and delta = 1 outside affected voxels.
struct GroundTruth {
    std::vector<std::int64_t> affected_voxels;  // masked column indices
    Matrix gamma;   // S x V
    Matrix delta;   // S x V
    Matrix beta;    // 2 x V (age slope, sex effect)
    Vector alpha;   // V
    Vector site_offset;  // S, site-wide additive shift
    double age_center = 0.0;  // ages enter as (age - age_center)
};

struct SynthBundle {
    std::vector<std::pair<std::string, Volume>> volumes;
    SampleTable table;
    Mask mask;
    GroundTruth truth;
};

/// Deterministic generation: identical spec (including seed) gives
/// bit-identical output regardless of parallelism.
SynthBundle generate(const SynthSpec& spec);

/// Write one volume per image, samples.csv, mask.nii.gz and
/// ground_truth.json.
void write_synth_bundle(const SynthBundle& bundle, const std::filesystem::path& dir);

}  // namespace habench::synth

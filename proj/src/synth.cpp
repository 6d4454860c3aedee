#include "habench/synth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "habench/core.hpp"
#include "habench/nifti.hpp"
#include "habench/rng.hpp"

namespace habench::synth {

namespace {

// Substream domains; voxel streams are keyed by full-grid linear index.
enum Domain : std::uint64_t {
    kAlpha = 1,
    kAffected = 2,
    kGammaBase = 100,   // + site index
    kBetaAge = 3,
    kBetaSex = 4,
    kAge = 5,
    kSex = 6,
    kNoiseBase = 1000,  // + subject index
};

constexpr std::int64_t kSmoothFactor = 4;  // coarse grid spacing for alpha

}  // namespace

void SynthSpec::validate() const {
    for (auto d : dims)
        if (d < 1) throw Error("synth dims must all be >= 1");
    if (sites.empty()) throw Error("synth spec needs at least one site");
    std::int64_t total = 0;
    for (const auto& site : sites) {
        if (site.label.empty()) throw Error("synth site label must be non-empty");
        if (site.n_images < 1) throw Error("synth site n_images must be >= 1");
        if (site.gamma_scale < 0) throw Error("synth gamma_scale must be nonnegative");
        if (!(site.delta_scale > 0)) throw Error("synth delta_scale must be positive");
        total += site.n_images;
    }
    if (total < 4) throw Error("synth spec needs at least 4 images in total");
    if (!(noise_sd > 0)) throw Error("synth noise_sd must be positive");
    if (!(affected_fraction >= 0 && affected_fraction <= 1))
        throw Error("synth affected_fraction outside [0, 1]");
    if (!(covariates.age_range[0] <= covariates.age_range[1]))
        throw Error("synth age_range must be ordered");
    if (mask_shape.kind == MaskShape::Kind::CenteredBox &&
        !(mask_shape.fraction > 0 && mask_shape.fraction <= 1))
        throw Error("synth centered_box fraction outside (0, 1]");
}

SynthSpec parse_synth_spec(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("spec parse error: ") + e.what());
    }
    SynthSpec spec;
    spec.seed = doc.value("seed", 0ULL);
    if (doc.contains("dims")) {
        if (!doc["dims"].is_array() || doc["dims"].size() != 3)
            throw Error("spec dims must be an array of 3 integers");
        for (int d = 0; d < 3; ++d) spec.dims[d] = doc["dims"][d];
    }
    if (doc.contains("mask")) {
        const auto& mask = doc["mask"];
        const std::string shape = mask.value("shape", "full");
        if (shape == "full") {
            spec.mask_shape.kind = MaskShape::Kind::Full;
        } else if (shape == "centered_box") {
            spec.mask_shape.kind = MaskShape::Kind::CenteredBox;
            spec.mask_shape.fraction = mask.value("fraction", 0.5);
        } else {
            throw Error("unknown mask shape: " + shape);
        }
    }
    if (!doc.contains("sites")) throw Error("spec must list sites");
    for (const auto& s : doc["sites"]) {
        SiteSpec site;
        site.label = s.at("label");
        site.n_images = s.at("n_images");
        site.gamma_scale = s.value("gamma_scale", 0.0);
        site.site_offset = s.value("site_offset", 0.0);
        site.delta_scale = s.value("delta_scale", 1.0);
        spec.sites.push_back(site);
    }
    if (doc.contains("covariates")) {
        const auto& c = doc["covariates"];
        if (c.contains("age_range")) {
            spec.covariates.age_range[0] = c["age_range"][0];
            spec.covariates.age_range[1] = c["age_range"][1];
        }
        spec.covariates.age_effect = c.value("age_effect", 0.0);
        spec.covariates.sex_effect = c.value("sex_effect", 0.0);
    }
    spec.noise_sd = doc.value("noise_sd", 0.05);
    spec.affected_fraction = doc.value("affected_fraction", 0.0);
    spec.validate();
    return spec;
}

SynthSpec read_synth_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open spec: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_synth_spec(buffer.str());
}

namespace {

/// Low-frequency field: trilinear interpolation of a coarse uniform grid.
Vector smooth_field(const SynthSpec& spec) {
    const auto& dims = spec.dims;
    std::array<std::int64_t, 3> coarse;
    for (int d = 0; d < 3; ++d) coarse[d] = (dims[d] - 1) / kSmoothFactor + 2;
    auto grid_at = [&](std::int64_t gx, std::int64_t gy, std::int64_t gz) {
        const std::uint64_t lin = gx + coarse[0] * (gy + coarse[1] * gz);
        Substream stream(spec.seed, kAlpha, lin);
        return 0.1 + 0.8 * stream.next_unit();  // FA-like range
    };
    Vector field(dims[0] * dims[1] * dims[2]);
    std::int64_t idx = 0;
    for (std::int64_t z = 0; z < dims[2]; ++z)
        for (std::int64_t y = 0; y < dims[1]; ++y)
            for (std::int64_t x = 0; x < dims[0]; ++x, ++idx) {
                const double fx = static_cast<double>(x) / kSmoothFactor;
                const double fy = static_cast<double>(y) / kSmoothFactor;
                const double fz = static_cast<double>(z) / kSmoothFactor;
                const std::int64_t gx = static_cast<std::int64_t>(fx);
                const std::int64_t gy = static_cast<std::int64_t>(fy);
                const std::int64_t gz = static_cast<std::int64_t>(fz);
                const double tx = fx - gx;
                const double ty = fy - gy;
                const double tz = fz - gz;
                double value = 0.0;
                for (int cz = 0; cz < 2; ++cz)
                    for (int cy = 0; cy < 2; ++cy)
                        for (int cx = 0; cx < 2; ++cx) {
                            const double w = (cx ? tx : 1 - tx) * (cy ? ty : 1 - ty) *
                                             (cz ? tz : 1 - tz);
                            value += w * grid_at(gx + cx, gy + cy, gz + cz);
                        }
                field[idx] = value;
            }
    return field;
}

Mask build_mask(const SynthSpec& spec) {
    VolumeGeometry geometry;
    geometry.dims = spec.dims;
    const std::int64_t total = geometry.voxel_count();
    std::vector<bool> flags(total, true);
    if (spec.mask_shape.kind == MaskShape::Kind::CenteredBox) {
        const double f = spec.mask_shape.fraction;
        std::array<std::int64_t, 3> lo, hi;
        for (int d = 0; d < 3; ++d) {
            const std::int64_t extent =
                std::max<std::int64_t>(1, static_cast<std::int64_t>(spec.dims[d] * f + 0.5));
            lo[d] = (spec.dims[d] - extent) / 2;
            hi[d] = lo[d] + extent;
        }
        std::int64_t idx = 0;
        for (std::int64_t z = 0; z < spec.dims[2]; ++z)
            for (std::int64_t y = 0; y < spec.dims[1]; ++y)
                for (std::int64_t x = 0; x < spec.dims[0]; ++x, ++idx)
                    flags[idx] = x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1] &&
                                 z >= lo[2] && z < hi[2];
    }
    return Mask::from_flags(geometry, std::move(flags));
}

}  // namespace

SynthBundle generate(const SynthSpec& spec) {
    spec.validate();

    SynthBundle bundle;
    bundle.mask = build_mask(spec);
    const std::int64_t v = bundle.mask.voxel_count();
    const std::int64_t s = static_cast<std::int64_t>(spec.sites.size());

    const Vector alpha_full = smooth_field(spec);
    bundle.truth.alpha.resize(v);
    for (std::int64_t k = 0; k < v; ++k)
        bundle.truth.alpha[k] = alpha_full[bundle.mask.voxel_index[k]];
    bundle.truth.age_center =
        0.5 * (spec.covariates.age_range[0] + spec.covariates.age_range[1]);

    // Affected voxels and per-voxel effects, keyed by full-grid index so
    // the draw does not depend on the mask.
    bundle.truth.gamma = Matrix::Zero(s, v);
    bundle.truth.delta = Matrix::Ones(s, v);
    bundle.truth.beta = Matrix::Zero(2, v);
    bundle.truth.site_offset.resize(s);
    for (std::int64_t i = 0; i < s; ++i) bundle.truth.site_offset[i] = spec.sites[i].site_offset;
    for (std::int64_t k = 0; k < v; ++k) {
        const std::uint64_t lin = bundle.mask.voxel_index[k];
        Substream affected_stream(spec.seed, kAffected, lin);
        if (affected_stream.next_unit() < spec.affected_fraction) {
            bundle.truth.affected_voxels.push_back(k);
            for (std::int64_t i = 0; i < s; ++i) {
                Substream gamma_stream(spec.seed, kGammaBase + i, lin);
                bundle.truth.gamma(i, k) =
                    spec.sites[i].gamma_scale * gamma_stream.next_normal();
                bundle.truth.delta(i, k) = spec.sites[i].delta_scale;
            }
            Substream age_stream(spec.seed, kBetaAge, lin);
            Substream sex_stream(spec.seed, kBetaSex, lin);
            bundle.truth.beta(0, k) = spec.covariates.age_effect * age_stream.next_normal();
            bundle.truth.beta(1, k) = spec.covariates.sex_effect * sex_stream.next_normal();
        }
    }

    // Subjects: global index in site order fixes every per-subject draw.
    std::int64_t subject = 0;
    for (std::int64_t i = 0; i < s; ++i) {
        for (std::int64_t j = 0; j < spec.sites[i].n_images; ++j, ++subject) {
            Substream age_stream(spec.seed, kAge, subject);
            Substream sex_stream(spec.seed, kSex, subject);
            const double age = spec.covariates.age_range[0] +
                               (spec.covariates.age_range[1] - spec.covariates.age_range[0]) *
                                   age_stream.next_unit();
            const bool male = sex_stream.next_unit() < 0.5;

            char id[64];
            std::snprintf(id, sizeof(id), "image_%04d.nii.gz", static_cast<int>(subject));

            SampleRow row;
            row.image_id = id;
            row.site = spec.sites[i].label;
            char age_text[32];
            std::snprintf(age_text, sizeof(age_text), "%.6f", age);
            row.covariates["age"] = age_text;
            row.covariates["sex"] = male ? "M" : "F";
            bundle.table.rows.push_back(row);

            Volume vol;
            vol.geometry = bundle.mask.geometry;
            vol.data.resize(vol.geometry.voxel_count());
            const double age_term = age - bundle.truth.age_center;
            Substream noise(spec.seed, kNoiseBase + subject, 0);
            // Unmasked voxels carry the baseline field plus noise only.
            for (std::int64_t lin = 0; lin < vol.geometry.voxel_count(); ++lin)
                vol.data[lin] = alpha_full[lin] + spec.noise_sd * noise.next_normal();
            for (std::int64_t k = 0; k < v; ++k) {
                const std::int64_t lin = bundle.mask.voxel_index[k];
                const double eps = (vol.data[lin] - alpha_full[lin]);  // delta scales the noise
                vol.data[lin] = alpha_full[lin] + spec.sites[i].site_offset +
                                bundle.truth.beta(0, k) * age_term +
                                bundle.truth.beta(1, k) * (male ? 1.0 : 0.0) +
                                bundle.truth.gamma(i, k) + bundle.truth.delta(i, k) * eps;
            }
            bundle.volumes.emplace_back(id, std::move(vol));
        }
    }
    return bundle;
}

void write_synth_bundle(const SynthBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [id, vol] : bundle.volumes)
        nifti::write_volume(vol, dir / id, nifti::ElementType::Float64);
    nifti::write_volume(embed_row(Vector::Ones(bundle.mask.voxel_count()), bundle.mask),
                        dir / "mask.nii.gz", nifti::ElementType::Float32);

    std::string csv = "image,site,age,sex\n";
    for (const auto& row : bundle.table.rows)
        csv += row.image_id + ',' + row.site + ',' + row.covariates.at("age") + ',' +
               row.covariates.at("sex") + '\n';
    std::ofstream table_out(dir / "samples.csv", std::ios::binary);
    if (!table_out) throw Error("cannot write samples.csv");
    table_out << csv;

    nlohmann::json truth;
    truth["affected_voxels"] = bundle.truth.affected_voxels;
    nlohmann::json per_site = nlohmann::json::object();
    // Per-site generative magnitudes, recovered from the truth matrices.
    std::map<std::string, std::int64_t> site_index;
    {
        SiteLayout layout = SiteLayout::from_table(bundle.table);
        for (std::int64_t i = 0; i < layout.site_count(); ++i) {
            nlohmann::json entry;
            double gamma_ss = 0.0;
            double delta_value = 1.0;
            for (auto k : bundle.truth.affected_voxels) {
                gamma_ss += bundle.truth.gamma(i, k) * bundle.truth.gamma(i, k);
                delta_value = bundle.truth.delta(i, k);
            }
            const std::size_t n_affected = bundle.truth.affected_voxels.size();
            entry["gamma_scale"] =
                n_affected > 0 ? std::sqrt(gamma_ss / static_cast<double>(n_affected)) : 0.0;
            entry["delta_scale"] = delta_value;
            entry["site_offset"] = bundle.truth.site_offset[i];
            per_site[layout.sites[i]] = entry;
        }
    }
    truth["per_site"] = per_site;
    truth["alpha_summary"] = {{"min", bundle.truth.alpha.minCoeff()},
                              {"max", bundle.truth.alpha.maxCoeff()}};
    std::ofstream truth_out(dir / "ground_truth.json", std::ios::binary);
    if (!truth_out) throw Error("cannot write ground_truth.json");
    truth_out << truth.dump(2) << "\n";
}

}  // namespace habench::synth

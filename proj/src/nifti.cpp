#include "habench/nifti.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include <zlib.h>

namespace habench::nifti {

namespace {

constexpr std::int32_t kHeaderSize = 348;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == kHeaderSize);

template <typename T>
T byte_swapped(T value) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void swap_header(Nifti1Header& h) {
    h.sizeof_hdr = byte_swapped(h.sizeof_hdr);
    for (auto& d : h.dim) d = byte_swapped(d);
    h.intent_code = byte_swapped(h.intent_code);
    h.datatype = byte_swapped(h.datatype);
    h.bitpix = byte_swapped(h.bitpix);
    for (auto& p : h.pixdim) p = byte_swapped(p);
    h.vox_offset = byte_swapped(h.vox_offset);
    h.scl_slope = byte_swapped(h.scl_slope);
    h.scl_inter = byte_swapped(h.scl_inter);
    h.qform_code = byte_swapped(h.qform_code);
    h.sform_code = byte_swapped(h.sform_code);
    for (auto& v : h.srow_x) v = byte_swapped(v);
    for (auto& v : h.srow_y) v = byte_swapped(v);
    for (auto& v : h.srow_z) v = byte_swapped(v);
}

std::vector<char> read_file(const std::filesystem::path& path) {
    // gzread handles both gzip-compressed and plain files.
    gzFile file = gzopen(path.string().c_str(), "rb");
    if (!file) throw Error("cannot open file: " + path.string());
    std::vector<char> bytes;
    char buffer[1 << 16];
    int got;
    while ((got = gzread(file, buffer, sizeof(buffer))) > 0)
        bytes.insert(bytes.end(), buffer, buffer + got);
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw Error("read failure: " + path.string());
    return bytes;
}

template <typename T>
T load_element(const char* ptr, bool swap) {
    T value;
    std::memcpy(&value, ptr, sizeof(T));
    return swap ? byte_swapped(value) : value;
}

}  // namespace

Volume read_volume(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("file does not exist: " + path.string());
    const std::vector<char> bytes = read_file(path);
    if (bytes.size() < static_cast<std::size_t>(kHeaderSize))
        throw Error("truncated header: " + path.string());

    Nifti1Header header;
    std::memcpy(&header, bytes.data(), kHeaderSize);
    bool swap = false;
    if (header.sizeof_hdr != kHeaderSize) {
        if (byte_swapped(header.sizeof_hdr) != kHeaderSize)
            throw Error("not a NIfTI-1 file (bad sizeof_hdr): " + path.string());
        swap = true;
        swap_header(header);
    }

    if (std::memcmp(header.magic, "ni1", 4) == 0)
        throw Error("unsupported two-file format: " + path.string());
    if (std::memcmp(header.magic, "n+1", 4) != 0)
        throw Error("bad magic: " + path.string());

    if (header.dim[0] < 1 || header.dim[0] > 7)
        throw Error("dim[0] outside 1..7: " + path.string());
    for (int d = 4; d <= header.dim[0]; ++d)
        if (header.dim[d] > 1)
            throw Error("volume has more than 3 non-trivial dimensions: " + path.string());

    Volume vol;
    for (int d = 0; d < 3; ++d) {
        vol.geometry.dims[d] = d < header.dim[0] ? header.dim[d + 1] : 1;
        if (vol.geometry.dims[d] < 1) throw Error("nonpositive dimension: " + path.string());
        vol.geometry.voxel_size[d] = d < header.dim[0] ? header.pixdim[d + 1] : 1.0;
        if (!(vol.geometry.voxel_size[d] > 0)) vol.geometry.voxel_size[d] = 1.0;
    }
    if (header.sform_code >= 1) {
        for (int c = 0; c < 4; ++c) {
            vol.geometry.affine(0, c) = header.srow_x[c];
            vol.geometry.affine(1, c) = header.srow_y[c];
            vol.geometry.affine(2, c) = header.srow_z[c];
        }
        vol.geometry.affine.row(3) << 0, 0, 0, 1;
    }
    vol.description.assign(header.descrip, strnlen(header.descrip, sizeof(header.descrip)));

    std::size_t element_size;
    switch (header.datatype) {
        case kDtInt16: element_size = 2; break;
        case kDtFloat32: element_size = 4; break;
        case kDtFloat64: element_size = 8; break;
        default:
            throw Error("unsupported element type " + std::to_string(header.datatype) + ": " +
                        path.string());
    }

    const std::int64_t count = vol.geometry.voxel_count();
    const std::size_t offset = static_cast<std::size_t>(header.vox_offset);
    if (offset < static_cast<std::size_t>(kHeaderSize) ||
        bytes.size() < offset + element_size * static_cast<std::size_t>(count))
        throw Error("truncated data section: " + path.string());

    const double slope = header.scl_slope != 0.0f ? header.scl_slope : 1.0;
    const double inter = header.scl_slope != 0.0f ? header.scl_inter : 0.0;

    vol.data.resize(count);
    const char* ptr = bytes.data() + offset;
    for (std::int64_t i = 0; i < count; ++i, ptr += element_size) {
        double raw;
        switch (header.datatype) {
            case kDtInt16: raw = load_element<std::int16_t>(ptr, swap); break;
            case kDtFloat32: raw = load_element<float>(ptr, swap); break;
            default: raw = load_element<double>(ptr, swap); break;
        }
        const double value = raw * slope + inter;
        if (!std::isfinite(value))
            throw Error("non-finite value at voxel " + std::to_string(i) + ": " + path.string());
        vol.data[i] = value;
    }
    return vol;
}

void write_volume(const Volume& volume, const std::filesystem::path& path,
                  ElementType element_type) {
    volume.validate();

    Nifti1Header header;
    std::memset(&header, 0, sizeof(header));
    header.sizeof_hdr = kHeaderSize;
    header.regular = 'r';
    header.dim[0] = 3;
    for (int d = 0; d < 3; ++d) {
        header.dim[d + 1] = static_cast<std::int16_t>(volume.geometry.dims[d]);
        if (header.dim[d + 1] != volume.geometry.dims[d])
            throw Error("dimension too large for NIfTI-1 header");
        header.pixdim[d + 1] = static_cast<float>(volume.geometry.voxel_size[d]);
    }
    for (int d = 4; d < 8; ++d) header.dim[d] = 1;
    header.pixdim[0] = 1.0f;
    header.datatype = element_type == ElementType::Float32 ? kDtFloat32 : kDtFloat64;
    header.bitpix = element_type == ElementType::Float32 ? 32 : 64;
    header.vox_offset = 352.0f;
    header.scl_slope = 1.0f;
    header.scl_inter = 0.0f;
    header.sform_code = 1;
    for (int c = 0; c < 4; ++c) {
        header.srow_x[c] = static_cast<float>(volume.geometry.affine(0, c));
        header.srow_y[c] = static_cast<float>(volume.geometry.affine(1, c));
        header.srow_z[c] = static_cast<float>(volume.geometry.affine(2, c));
    }
    std::memcpy(header.descrip, volume.description.c_str(),
                std::min<std::size_t>(volume.description.size(), 79));
    std::memcpy(header.magic, "n+1", 4);

    std::vector<char> payload;
    payload.resize(4, 0);  // extension flag: no extensions
    if (element_type == ElementType::Float32) {
        for (double v : volume.data) {
            const float f = static_cast<float>(v);
            if (!std::isfinite(f) && std::isfinite(v))
                throw Error("value not representable in float32: " + std::to_string(v));
            const char* p = reinterpret_cast<const char*>(&f);
            payload.insert(payload.end(), p, p + sizeof(float));
        }
    } else {
        const char* p = reinterpret_cast<const char*>(volume.data.data());
        payload.insert(payload.end(), p, p + volume.data.size() * sizeof(double));
    }

    const bool gzip = path.extension() == ".gz";
    if (gzip) {
        gzFile file = gzopen(path.string().c_str(), "wb");
        if (!file) throw Error("cannot open for writing: " + path.string());
        bool ok = gzwrite(file, &header, kHeaderSize) == kHeaderSize;
        ok = ok && gzwrite(file, payload.data(), static_cast<unsigned>(payload.size())) ==
                       static_cast<int>(payload.size());
        ok = gzclose(file) == Z_OK && ok;
        if (!ok) throw Error("write failure: " + path.string());
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot open for writing: " + path.string());
        out.write(reinterpret_cast<const char*>(&header), kHeaderSize);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error("write failure: " + path.string());
    }
}

}  // namespace habench::nifti

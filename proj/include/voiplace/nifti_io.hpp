#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "voiplace/volume.hpp"

namespace voiplace {

// Minimal NIfTI-1 support: single-file .nii, uncompressed, little-endian,
// integer voxels. Honored header fields: dim, datatype (2 = uint8,
// 4 = int16), pixdim, vox_offset, magic "n+1\0". Everything else is ignored
// on read and zeroed on write. The origin of a NIfTI volume is (0,0,0):
// the spatial transform fields are not among the honored set.

namespace nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int16_t kDtUint8 = 2;
inline constexpr int16_t kDtInt16 = 4;

// Little-endian field access into the 348-byte header buffer.
inline uint16_t get_u16(const unsigned char* b, int off) {
    return uint16_t(b[off]) | uint16_t(b[off + 1]) << 8;
}
inline int16_t get_i16(const unsigned char* b, int off) { return int16_t(get_u16(b, off)); }
inline uint32_t get_u32(const unsigned char* b, int off) {
    return uint32_t(b[off]) | uint32_t(b[off + 1]) << 8 | uint32_t(b[off + 2]) << 16 |
           uint32_t(b[off + 3]) << 24;
}
inline int32_t get_i32(const unsigned char* b, int off) { return int32_t(get_u32(b, off)); }
inline float get_f32(const unsigned char* b, int off) {
    uint32_t u = get_u32(b, off);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}
inline void put_i16(unsigned char* b, int off, int16_t v) {
    b[off] = uint8_t(v & 0xff);
    b[off + 1] = uint8_t((v >> 8) & 0xff);
}
inline void put_i32(unsigned char* b, int off, int32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = uint8_t((v >> (8 * i)) & 0xff);
}
inline void put_f32(unsigned char* b, int off, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) b[off + i] = uint8_t((u >> (8 * i)) & 0xff);
}

// Header field offsets (NIfTI-1 standard layout).
inline constexpr int kOffSizeofHdr = 0;
inline constexpr int kOffDim = 40;        // short dim[8]
inline constexpr int kOffDatatype = 70;   // short
inline constexpr int kOffBitpix = 72;     // short
inline constexpr int kOffPixdim = 76;     // float pixdim[8]
inline constexpr int kOffVoxOffset = 108; // float
inline constexpr int kOffMagic = 344;     // char magic[4]

}  // namespace nifti

// Raw integer volume as read from disk, before label mapping.
struct RawVolume {
    GridGeometry grid;
    std::vector<int32_t> values;
};

inline RawVolume read_nifti(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    unsigned char hdr[nifti::kHeaderSize];
    if (!in.read(reinterpret_cast<char*>(hdr), nifti::kHeaderSize))
        throw DataError("file too short for NIfTI-1 header: " + path);

    if (nifti::get_i32(hdr, nifti::kOffSizeofHdr) != 348)
        throw DataError("bad sizeof_hdr (not 348; byte-swapped or not NIfTI-1): " + path);
    if (std::memcmp(hdr + nifti::kOffMagic, "n+1\0", 4) != 0)
        throw DataError("unsupported magic (expected single-file \"n+1\"): " + path);

    const int ndim = nifti::get_i16(hdr, nifti::kOffDim);
    if (ndim < 3 || ndim > 7)
        throw DataError("unsupported dim[0]: " + std::to_string(ndim));
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        dims[a] = nifti::get_i16(hdr, nifti::kOffDim + 2 * (a + 1));
        if (dims[a] <= 0) throw DataError("non-positive dim in header: " + path);
    }
    for (int a = 4; a <= ndim; ++a) {
        int extra = nifti::get_i16(hdr, nifti::kOffDim + 2 * a);
        if (extra > 1) throw DataError("volume has more than 3 non-trivial dims: " + path);
    }

    const int16_t datatype = nifti::get_i16(hdr, nifti::kOffDatatype);
    if (datatype != nifti::kDtUint8 && datatype != nifti::kDtInt16)
        throw DataError("unsupported NIfTI datatype " + std::to_string(datatype) +
                        " (supported: 2=uint8, 4=int16): " + path);

    RawVolume rv;
    rv.grid.dims = dims;
    rv.grid.spacing = {nifti::get_f32(hdr, nifti::kOffPixdim + 4),
                       nifti::get_f32(hdr, nifti::kOffPixdim + 8),
                       nifti::get_f32(hdr, nifti::kOffPixdim + 12)};
    rv.grid.origin = {0, 0, 0};
    rv.grid.validate();

    const double vox_offset = nifti::get_f32(hdr, nifti::kOffVoxOffset);
    if (vox_offset < nifti::kHeaderSize)
        throw DataError("vox_offset before end of header: " + path);
    in.seekg(std::streamoff(vox_offset), std::ios::beg);

    const size_t n = rv.grid.voxel_count();
    rv.values.resize(n);
    if (datatype == nifti::kDtUint8) {
        std::vector<uint8_t> buf(n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n)))
            throw DataError("truncated voxel data: " + path);
        for (size_t i = 0; i < n; ++i) rv.values[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(n * 2);
        if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * 2)))
            throw DataError("truncated voxel data: " + path);
        for (size_t i = 0; i < n; ++i) rv.values[i] = nifti::get_i16(buf.data(), int(i * 2));
    }
    return rv;
}

// Writes a single-file .nii with uint8 voxels at vox_offset 352.
inline void write_nifti(const std::string& path, const GridGeometry& grid,
                        const std::vector<uint8_t>& voxels) {
    if (voxels.size() != grid.voxel_count())
        throw DataError("voxel buffer does not match grid");
    unsigned char hdr[nifti::kHeaderSize];
    std::memset(hdr, 0, sizeof(hdr));
    nifti::put_i32(hdr, nifti::kOffSizeofHdr, 348);
    nifti::put_i16(hdr, nifti::kOffDim, 3);
    for (int a = 0; a < 3; ++a) nifti::put_i16(hdr, nifti::kOffDim + 2 * (a + 1), int16_t(grid.dims[a]));
    for (int a = 4; a <= 7; ++a) nifti::put_i16(hdr, nifti::kOffDim + 2 * a, 1);
    nifti::put_i16(hdr, nifti::kOffDatatype, nifti::kDtUint8);
    nifti::put_i16(hdr, nifti::kOffBitpix, 8);
    nifti::put_f32(hdr, nifti::kOffPixdim + 4, float(grid.spacing.x));
    nifti::put_f32(hdr, nifti::kOffPixdim + 8, float(grid.spacing.y));
    nifti::put_f32(hdr, nifti::kOffPixdim + 12, float(grid.spacing.z));
    nifti::put_f32(hdr, nifti::kOffVoxOffset, 352.0f);
    std::memcpy(hdr + nifti::kOffMagic, "n+1\0", 4);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(hdr), nifti::kHeaderSize);
    const char extender[4] = {0, 0, 0, 0};
    out.write(extender, 4);
    out.write(reinterpret_cast<const char*>(voxels.data()), std::streamsize(voxels.size()));
    if (!out) throw DataError("write failed: " + path);
}

// Fallback format: <name>.json describing the grid + label encoding, and a
// sibling <name>.raw with one byte per voxel in x-fastest order.
inline std::string raw_sibling_path(const std::string& json_path) {
    auto dot = json_path.rfind(".json");
    if (dot == std::string::npos || dot != json_path.size() - 5)
        throw DataError("fallback volume path must end in .json: " + json_path);
    return json_path.substr(0, dot) + ".raw";
}

inline RawVolume read_fallback(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad fallback header " + path + ": " + e.what());
    }
    RawVolume rv;
    try {
        auto dims = j.at("dims");
        for (int a = 0; a < 3; ++a) rv.grid.dims[a] = dims.at(a).get<int>();
        auto sp = j.at("spacing_mm");
        rv.grid.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
        auto org = j.at("origin_mm");
        rv.grid.origin = {org.at(0).get<double>(), org.at(1).get<double>(), org.at(2).get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad fallback header " + path + ": " + e.what());
    }
    rv.grid.validate();

    const std::string raw_path = raw_sibling_path(path);
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw DataError("cannot open raw data: " + raw_path);
    const size_t n = rv.grid.voxel_count();
    std::vector<uint8_t> buf(n);
    if (!raw.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n)))
        throw DataError("truncated raw data: " + raw_path);
    rv.values.assign(buf.begin(), buf.end());
    return rv;
}

inline void write_fallback(const std::string& path, const GridGeometry& grid,
                           const std::vector<uint8_t>& voxels) {
    if (voxels.size() != grid.voxel_count())
        throw DataError("voxel buffer does not match grid");
    nlohmann::json j;
    j["dims"] = grid.dims;
    j["spacing_mm"] = {grid.spacing.x, grid.spacing.y, grid.spacing.z};
    j["origin_mm"] = {grid.origin.x, grid.origin.y, grid.origin.z};
    nlohmann::json enc;
    for (int i = 0; i < kNumLabels; ++i) enc[label_name(static_cast<Label>(i))] = i;
    j["label_encoding"] = enc;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << j.dump(2) << "\n";
    const std::string raw_path = raw_sibling_path(path);
    std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
    if (!raw) throw DataError("cannot write file: " + raw_path);
    raw.write(reinterpret_cast<const char*>(voxels.data()), std::streamsize(voxels.size()));
    if (!raw) throw DataError("write failed: " + raw_path);
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline RawVolume read_raw_volume(const std::string& path) {
    if (has_suffix(path, ".json")) return read_fallback(path);
    if (has_suffix(path, ".nii")) return read_nifti(path);
    throw DataError("unsupported volume format (expected .nii or .json): " + path);
}

inline void write_volume(const std::string& path, const GridGeometry& grid,
                         const std::vector<uint8_t>& voxels) {
    if (has_suffix(path, ".json")) return write_fallback(path, grid, voxels);
    if (has_suffix(path, ".nii")) return write_nifti(path, grid, voxels);
    throw DataError("unsupported volume format (expected .nii or .json): " + path);
}

inline void write_volume(const std::string& path, const LabelVolume& v) {
    write_volume(path, v.grid(), v.labels());
}

struct LoadOptions {
    LabelMap map = LabelMap::canonical();
    // Companion brain mask (any supported volume format, nonzero = brain),
    // used to split raw code 0 into NormalBrain/NonBrain for maps that ask
    // for it (e.g. BraTS).
    std::optional<std::string> brain_mask_path;
    std::ostream* warnings = &std::cerr;
};

inline LabelVolume load_label_volume(const std::string& path, const LoadOptions& opt) {
    RawVolume rv = read_raw_volume(path);

    std::vector<uint8_t> brain_mask;
    bool have_mask = false;
    if (opt.map.split_zero_by_brain_mask) {
        if (opt.brain_mask_path) {
            RawVolume mask = read_raw_volume(*opt.brain_mask_path);
            if (mask.grid.dims != rv.grid.dims)
                throw DataError("brain mask dims do not match volume: " + *opt.brain_mask_path);
            brain_mask.resize(mask.values.size());
            for (size_t i = 0; i < mask.values.size(); ++i)
                brain_mask[i] = mask.values[i] != 0;
            have_mask = true;
        } else if (opt.warnings) {
            *opt.warnings << "warning: no brain mask given; mapping all code-0 voxels to "
                             "NonBrain\n";
        }
    }

    std::vector<uint8_t> labels(rv.values.size());
    std::map<int, size_t> unmapped;  // code -> voxel count
    for (size_t i = 0; i < rv.values.size(); ++i) {
        const int code = rv.values[i];
        auto it = opt.map.codes.find(code);
        if (it == opt.map.codes.end()) {
            ++unmapped[code];
            continue;
        }
        Label l = it->second;
        if (code == 0 && have_mask)
            l = brain_mask[i] ? Label::NormalBrain : Label::NonBrain;
        labels[i] = uint8_t(l);
    }
    if (!unmapped.empty()) {
        std::string msg = "raw codes not covered by label map in " + path + ":";
        for (auto& [code, count] : unmapped)
            msg += " code " + std::to_string(code) + " (" + std::to_string(count) + " voxels)";
        throw DataError(msg);
    }
    return LabelVolume(rv.grid, std::move(labels));
}

inline LabelVolume load_label_volume(const std::string& path,
                                     const LabelMap& map = LabelMap::canonical()) {
    LoadOptions opt;
    opt.map = map;
    return load_label_volume(path, opt);
}

}  // namespace voiplace

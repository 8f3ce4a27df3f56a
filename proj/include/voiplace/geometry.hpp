#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "voiplace/vec.hpp"
#include "voiplace/volume.hpp"

namespace voiplace {

// 9-parameter VOI: world center (mm), full side lengths (mm), Euler angles
// (radians, intrinsic Z-Y-X, stored in the order az, ay, ax). The rotation
// turns box axes relative to world axes.
struct OrientedBox {
    Vec3 center{0, 0, 0};
    Vec3 lengths{10, 10, 10};
    Vec3 angles{0, 0, 0};

    double volume_ml() const { return lengths.x * lengths.y * lengths.z / 1000.0; }
    Mat3 rotation() const { return rotation_zyx(angles); }

    void normalize() {
        angles = {normalize_angle(angles.x), normalize_angle(angles.y),
                  normalize_angle(angles.z)};
    }

    // 9-vector lexicographic order (center, lengths, angles); the
    // deterministic tie-break used everywhere.
    bool lex_less(const OrientedBox& o) const {
        if (!(center == o.center)) return voiplace::lex_less(center, o.center);
        if (!(lengths == o.lengths)) return voiplace::lex_less(lengths, o.lengths);
        return voiplace::lex_less(angles, o.angles);
    }

    bool operator==(const OrientedBox& o) const {
        return center == o.center && lengths == o.lengths && angles == o.angles;
    }
};

inline bool contains_point(const OrientedBox& b, const Vec3& p) {
    const Vec3 q = b.rotation().apply_transposed(p - b.center);
    return std::abs(q.x) <= b.lengths.x * 0.5 && std::abs(q.y) <= b.lengths.y * 0.5 &&
           std::abs(q.z) <= b.lengths.z * 0.5;
}

// Box-vs-volume measurements. Fractions are over sample points inside the
// box; V and vVOI_necrosis are in mL; D is the minimum skull distance (mm)
// over voxel centers inside the box, +inf when the box contains none.
struct TissueOverlap {
    double fvoi_solid = 0;
    double fvoi_periphery = 0;
    double fvoi_necrosis = 0;
    double fvoi_normal = 0;
    double fsolid_outside = 0;
    double solid_in_voi_ml = 0;     // V
    double vvoi_necrosis_ml = 0;
    double skull_distance_mm = 0;   // D
};

namespace detail {

struct IndexRange {
    int lo[3], hi[3];
    bool empty = false;
};

// Voxels whose cube could contain sample points inside the box: the box's
// world AABB expanded by half a voxel, clamped to the grid.
inline IndexRange clipped_range(const OrientedBox& b, const GridGeometry& g, const Mat3& rot) {
    const Vec3 h = b.lengths * 0.5;
    Vec3 ext;
    for (int r = 0; r < 3; ++r) {
        double e = 0;
        for (int c = 0; c < 3; ++c) e += std::abs(rot(r, c)) * h[c];
        ext[r] = e;
    }
    IndexRange out;
    for (int a = 0; a < 3; ++a) {
        const double sp = g.spacing[a];
        const double lo = b.center[a] - ext[a], hi = b.center[a] + ext[a];
        out.lo[a] = std::max(0, int(std::ceil((lo - g.origin[a]) / sp - 0.5 - 1e-9)));
        out.hi[a] = std::min(g.dims[a] - 1, int(std::floor((hi - g.origin[a]) / sp + 0.5 + 1e-9)));
        if (out.lo[a] > out.hi[a]) out.empty = true;
    }
    return out;
}

}  // namespace detail

// Supersampled overlap: each voxel contributes supersample^3 sample points
// on a regular sub-grid. A voxel whose center is further than half the voxel
// diagonal inside (outside) every face is accepted (rejected) without
// visiting its samples.
inline TissueOverlap overlap(const OrientedBox& b, const LabelVolume& v, const DistanceMap& d,
                             int supersample) {
    if (supersample <= 0) throw std::invalid_argument("supersample must be >= 1");
    if (!(d.grid == v.grid())) throw DataError("distance map grid does not match volume");

    const GridGeometry& g = v.grid();
    const Mat3 rot = b.rotation();
    const Vec3 h = b.lengths * 0.5;
    const int s = supersample;
    const int s3 = s * s * s;

    // Sample offsets expressed in the box frame.
    std::vector<Vec3> offs;
    offs.reserve(size_t(s3));
    for (int c = 0; c < s; ++c)
        for (int bb = 0; bb < s; ++bb)
            for (int a = 0; a < s; ++a) {
                const Vec3 dw{((a + 0.5) / s - 0.5) * g.spacing.x,
                              ((bb + 0.5) / s - 0.5) * g.spacing.y,
                              ((c + 0.5) / s - 0.5) * g.spacing.z};
                offs.push_back(rot.apply_transposed(dw));
            }
    const double half_diag = 0.5 * g.spacing.norm();

    const auto range = detail::clipped_range(b, g, rot);
    int64_t counts[kNumLabels] = {0, 0, 0, 0, 0};
    double min_d = std::numeric_limits<double>::infinity();

    if (!range.empty) {
        // Row step of q = R^T (p - center) along +x.
        const Vec3 dq = rot.apply_transposed({g.spacing.x, 0, 0});
        const uint8_t* labels = v.labels().data();
        const double* dist = d.mm.data();
        for (int k = range.lo[2]; k <= range.hi[2]; ++k)
            for (int j = range.lo[1]; j <= range.hi[1]; ++j) {
                Vec3 q = rot.apply_transposed(g.world(range.lo[0], j, k) - b.center);
                size_t flat = g.index(range.lo[0], j, k);
                for (int i = range.lo[0]; i <= range.hi[0]; ++i, ++flat, q += dq) {
                    const double ax = std::abs(q.x), ay = std::abs(q.y), az = std::abs(q.z);
                    if (ax > h.x + half_diag || ay > h.y + half_diag || az > h.z + half_diag)
                        continue;
                    if (ax <= h.x && ay <= h.y && az <= h.z) {
                        const double dv = dist[flat];
                        if (dv < min_d) min_d = dv;
                        if (ax <= h.x - half_diag && ay <= h.y - half_diag &&
                            az <= h.z - half_diag) {
                            counts[labels[flat]] += s3;
                            continue;
                        }
                    }
                    int64_t inside = 0;
                    for (const Vec3& o : offs) {
                        if (std::abs(q.x + o.x) <= h.x && std::abs(q.y + o.y) <= h.y &&
                            std::abs(q.z + o.z) <= h.z)
                            ++inside;
                    }
                    counts[labels[flat]] += inside;
                }
            }
    }

    const int64_t total = counts[0] + counts[1] + counts[2] + counts[3] + counts[4];
    const double sample_ml = g.voxel_volume_ml() / double(s3);
    const int64_t solid_total = v.class_count(Label::SolidTumor) * int64_t(s3);
    const int64_t solid_in = counts[int(Label::SolidTumor)];

    TissueOverlap ov;
    if (total > 0) {
        ov.fvoi_solid = double(solid_in) / double(total);
        ov.fvoi_periphery = double(counts[int(Label::Periphery)]) / double(total);
        ov.fvoi_necrosis = double(counts[int(Label::Necrosis)]) / double(total);
        ov.fvoi_normal = double(counts[int(Label::NormalBrain)]) / double(total);
    }
    ov.solid_in_voi_ml = double(solid_in) * sample_ml;
    ov.vvoi_necrosis_ml = double(counts[int(Label::Necrosis)]) * sample_ml;
    // Fraction of all solid tumor missed by the box; 0 when the volume has
    // no solid tumor at all.
    ov.fsolid_outside =
        solid_total > 0 ? double(solid_total - solid_in) / double(solid_total) : 0.0;
    ov.skull_distance_mm = min_d;
    return ov;
}

struct MaskVolume {
    GridGeometry grid;
    std::vector<uint8_t> data;  // 1 = voxel center inside the box
};

inline MaskVolume rasterize(const OrientedBox& b, const GridGeometry& g) {
    MaskVolume m;
    m.grid = g;
    m.data.assign(g.voxel_count(), 0);
    const Mat3 rot = b.rotation();
    const Vec3 h = b.lengths * 0.5;
    const auto range = detail::clipped_range(b, g, rot);
    if (range.empty) return m;
    const Vec3 dq = rot.apply_transposed({g.spacing.x, 0, 0});
    for (int k = range.lo[2]; k <= range.hi[2]; ++k)
        for (int j = range.lo[1]; j <= range.hi[1]; ++j) {
            Vec3 q = rot.apply_transposed(g.world(range.lo[0], j, k) - b.center);
            size_t flat = g.index(range.lo[0], j, k);
            for (int i = range.lo[0]; i <= range.hi[0]; ++i, ++flat, q += dq) {
                if (std::abs(q.x) <= h.x && std::abs(q.y) <= h.y && std::abs(q.z) <= h.z)
                    m.data[flat] = 1;
            }
        }
    return m;
}

}  // namespace voiplace

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "voiplace/labels.hpp"
#include "voiplace/vec.hpp"

namespace voiplace {

// A data error: malformed file, inconsistent grids, unusable segmentation.
// The CLI maps this family to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Regular axis-aligned voxel grid. origin is the world position (mm) of the
// center of voxel (0,0,0); voxels are stored x-fastest.
struct GridGeometry {
    std::array<int, 3> dims{0, 0, 0};
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};

    size_t voxel_count() const {
        return size_t(dims[0]) * size_t(dims[1]) * size_t(dims[2]);
    }
    size_t index(int i, int j, int k) const {
        return size_t(i) + size_t(dims[0]) * (size_t(j) + size_t(dims[1]) * size_t(k));
    }
    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
    Vec3 world(int i, int j, int k) const {
        return {origin.x + spacing.x * i, origin.y + spacing.y * j, origin.z + spacing.z * k};
    }
    // Index of the voxel whose center is nearest to p (unclamped).
    std::array<int, 3> nearest_index(const Vec3& p) const {
        return {int(std::lround((p.x - origin.x) / spacing.x)),
                int(std::lround((p.y - origin.y) / spacing.y)),
                int(std::lround((p.z - origin.z) / spacing.z))};
    }
    Vec3 world_center() const {
        return {origin.x + spacing.x * (dims[0] - 1) * 0.5,
                origin.y + spacing.y * (dims[1] - 1) * 0.5,
                origin.z + spacing.z * (dims[2] - 1) * 0.5};
    }
    double voxel_volume_ml() const { return spacing.x * spacing.y * spacing.z / 1000.0; }

    bool operator==(const GridGeometry& o) const {
        return dims == o.dims && spacing == o.spacing && origin == o.origin;
    }

    void validate() const {
        if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
            throw DataError("grid dims must be positive");
        if (spacing.x <= 0 || spacing.y <= 0 || spacing.z <= 0)
            throw DataError("grid spacing must be positive");
    }
};

inline constexpr std::array<int, 3> kStandardDims{128, 128, 128};
inline constexpr double kStandardSpacingMm = 2.0;

// Immutable after construction; safe to share across threads.
class LabelVolume {
public:
    LabelVolume() = default;
    LabelVolume(GridGeometry grid, std::vector<uint8_t> labels)
        : grid_(grid), labels_(std::move(labels)) {
        grid_.validate();
        if (labels_.size() != grid_.voxel_count())
            throw DataError("label buffer size does not match grid");
        class_counts_.fill(0);
        for (uint8_t c : labels_) {
            if (c >= kNumLabels) throw DataError("voxel label out of range");
            ++class_counts_[c];
        }
    }

    const GridGeometry& grid() const { return grid_; }
    const std::vector<uint8_t>& labels() const { return labels_; }

    Label at(int i, int j, int k) const {
        return static_cast<Label>(labels_[grid_.index(i, j, k)]);
    }
    uint8_t code(size_t flat) const { return labels_[flat]; }

    int64_t class_count(Label l) const { return class_counts_[static_cast<int>(l)]; }
    const std::array<int64_t, kNumLabels>& class_counts() const { return class_counts_; }

private:
    GridGeometry grid_;
    std::vector<uint8_t> labels_;
    std::array<int64_t, kNumLabels> class_counts_{};
};

// Per-voxel Euclidean distance (mm) to the nearest NonBrain voxel center.
struct DistanceMap {
    GridGeometry grid;
    std::vector<double> mm;

    double at(size_t flat) const { return mm[flat]; }
};

inline double tissue_volume_ml(const LabelVolume& v, Label l) {
    return double(v.class_count(l)) * v.grid().voxel_volume_ml();
}

// Nearest-neighbor resample onto a new grid with the given spacing/dims.
// The output field of view is centered on the source volume's world center;
// output voxels falling outside the source field of view become NonBrain.
inline LabelVolume resample_nearest(const LabelVolume& v, const Vec3& spacing,
                                    const std::array<int, 3>& dims) {
    GridGeometry out;
    out.dims = dims;
    out.spacing = spacing;
    Vec3 c = v.grid().world_center();
    out.origin = {c.x - spacing.x * (dims[0] - 1) * 0.5,
                  c.y - spacing.y * (dims[1] - 1) * 0.5,
                  c.z - spacing.z * (dims[2] - 1) * 0.5};
    out.validate();

    const GridGeometry& src = v.grid();
    std::vector<uint8_t> labels(out.voxel_count(), 0);
    size_t n = 0;
    for (int k = 0; k < dims[2]; ++k)
        for (int j = 0; j < dims[1]; ++j)
            for (int i = 0; i < dims[0]; ++i, ++n) {
                auto idx = src.nearest_index(out.world(i, j, k));
                if (src.in_bounds(idx[0], idx[1], idx[2]))
                    labels[n] = uint8_t(v.at(idx[0], idx[1], idx[2]));
            }
    return LabelVolume(out, std::move(labels));
}

inline LabelVolume standardize(const LabelVolume& v) {
    return resample_nearest(v, {kStandardSpacingMm, kStandardSpacingMm, kStandardSpacingMm},
                            kStandardDims);
}

namespace detail {

// 1D squared Euclidean distance transform (Felzenszwalb-Huttenlocher lower
// envelope of parabolas), with sample pitch h. f holds squared distances.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& out, double h,
                   std::vector<int>& v, std::vector<double>& z) {
    const int n = int(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    v.resize(size_t(n));
    z.resize(size_t(n) + 1);
    // Build the lower envelope over the finite parabolas only; infinite
    // sources never contribute and would poison the intersection arithmetic.
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (!(f[size_t(q)] < inf)) continue;
        double s = -inf;
        while (k >= 0) {
            const int p = v[size_t(k)];
            s = ((f[size_t(q)] + double(q) * q * h * h) -
                 (f[size_t(p)] + double(p) * p * h * h)) /
                (2.0 * h * h * (q - p));
            if (s > z[size_t(k)]) break;
            --k;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -inf;
        } else {
            ++k;
            v[size_t(k)] = q;
            z[size_t(k)] = s;
        }
        z[size_t(k) + 1] = inf;
    }
    if (k < 0) {  // no finite source anywhere on this line
        std::fill(out.begin(), out.begin() + n, inf);
        return;
    }
    // z is in index units (the intersection formula divides by h^2 * dq), so
    // the query position is the bare index q, not q*h.
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[size_t(k) + 1] < double(q)) ++k;
        const double d = (double(q) - v[size_t(k)]) * h;
        out[size_t(q)] = d * d + f[size_t(v[size_t(k)])];
    }
}

}  // namespace detail

// Exact anisotropic Euclidean distance transform to the nearest NonBrain
// voxel center. Distances are voxel-center to voxel-center, in mm.
inline DistanceMap skull_distance_map(const LabelVolume& v) {
    if (v.class_count(Label::NonBrain) == 0)
        throw DataError("volume has no NonBrain voxels; cannot build skull distance map");

    const GridGeometry& g = v.grid();
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> sq(g.voxel_count());
    for (size_t i = 0; i < sq.size(); ++i)
        sq[i] = v.code(i) == uint8_t(Label::NonBrain) ? 0.0 : inf;

    std::vector<int> vbuf;
    std::vector<double> zbuf, line, out;

    // X pass
    line.resize(nx);
    out.resize(nx);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            const size_t base = g.index(0, j, k);
            for (int i = 0; i < nx; ++i) line[i] = sq[base + i];
            detail::edt_1d(line, out, g.spacing.x, vbuf, zbuf);
            for (int i = 0; i < nx; ++i) sq[base + i] = out[i];
        }
    // Y pass
    line.resize(ny);
    out.resize(ny);
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) line[j] = sq[g.index(i, j, k)];
            detail::edt_1d(line, out, g.spacing.y, vbuf, zbuf);
            for (int j = 0; j < ny; ++j) sq[g.index(i, j, k)] = out[j];
        }
    // Z pass
    line.resize(nz);
    out.resize(nz);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            for (int k = 0; k < nz; ++k) line[k] = sq[g.index(i, j, k)];
            detail::edt_1d(line, out, g.spacing.z, vbuf, zbuf);
            for (int k = 0; k < nz; ++k) sq[g.index(i, j, k)] = out[k];
        }

    DistanceMap d;
    d.grid = g;
    d.mm.resize(sq.size());
    for (size_t i = 0; i < sq.size(); ++i) d.mm[i] = std::sqrt(sq[i]);
    return d;
}

}  // namespace voiplace

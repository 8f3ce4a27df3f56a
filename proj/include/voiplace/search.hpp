#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "voiplace/geometry.hpp"
#include "voiplace/objective.hpp"
#include "voiplace/parallel.hpp"

namespace voiplace {

struct SearchConfig {
    double len_min_mm = 10.0;
    double len_max_mm = 50.0;

    // Coarse stage: axis-aligned sweep on a voxel-aligned center lattice,
    // then a full angle grid applied to the best axis-aligned seeds.
    double coarse_center_step_mm = 8.0;
    std::vector<double> coarse_lengths_mm = {16, 24, 32, 40};
    double coarse_angle_step_deg = 15.0;
    double coarse_angle_range_deg = 30.0;
    int angle_seeds_full = 8;
    int angle_seeds_conditioned = 2;

    // Refinement: coordinate-wise pattern search on all free parameters.
    int refine_passes = 300;  // hard iteration cap (safety, not the normal exit)
    double shrink = 0.5;
    double init_center_step_mm = 4.0;
    double init_length_step_mm = 4.0;
    double init_angle_step_deg = 7.5;
    double min_center_step_mm = 1.0;
    double min_length_step_mm = 1.0;
    double min_angle_step_deg = 2.0;

    int coarse_supersample = 2;
    int refine_supersample = 4;

    uint64_t seed = 0;  // recorded in artifacts; the search itself is deterministic
    int threads = 0;    // 0 = all hardware threads

    void validate() const {
        if (!(len_min_mm > 0) || !(len_max_mm >= len_min_mm))
            throw std::invalid_argument("search config: need 0 < len_min <= len_max");
        if (!(coarse_center_step_mm > 0) || coarse_lengths_mm.empty())
            throw std::invalid_argument("search config: coarse grid must be non-empty");
        if (!(coarse_angle_step_deg > 0) || coarse_angle_range_deg < 0)
            throw std::invalid_argument("search config: bad coarse angle grid");
        if (!(shrink > 0) || !(shrink < 1))
            throw std::invalid_argument("search config: shrink factor must be in (0,1)");
        if (init_center_step_mm <= 0 || init_length_step_mm <= 0 || init_angle_step_deg <= 0 ||
            min_center_step_mm <= 0 || min_length_step_mm <= 0 || min_angle_step_deg <= 0)
            throw std::invalid_argument("search config: steps must be positive");
        if (coarse_supersample < 1 || refine_supersample < 1)
            throw std::invalid_argument("search config: supersample must be >= 1");
        if (refine_passes < 1 || angle_seeds_full < 1 || angle_seeds_conditioned < 1)
            throw std::invalid_argument("search config: counts must be >= 1");
    }
};

struct SearchProvenance {
    enum class Kind { Full, Conditioned };
    Kind kind = Kind::Full;
    int center_index = -1;  // position in the sampled-center list when conditioned
    std::string profile;

    std::string to_string() const {
        if (kind == Kind::Full) return "full";
        return "conditioned[" + std::to_string(center_index) + "]";
    }
};

struct PlacementResult {
    OrientedBox theta;
    ObjectiveBreakdown breakdown;  // at the refinement supersample
    TissueOverlap overlap;
    SearchProvenance provenance;
    int64_t evaluations = 0;

    // Seed the refinement started from, and its objective at the refinement
    // supersample; refinement never returns a placement scoring below it.
    OrientedBox coarse_theta;
    double coarse_total = 0;
};

namespace detail {

// Strict total order on (score, theta): higher score wins, equal scores go
// to the lexicographically smaller theta. Every reduction in the search
// uses this, which makes results independent of evaluation order.
inline bool better(double sa, const OrientedBox& ta, double sb, const OrientedBox& tb) {
    if (sa != sb) return sa > sb;
    return ta.lex_less(tb);
}

struct IndexBounds {
    int lo[3] = {0, 0, 0}, hi[3] = {-1, -1, -1};
};

inline std::optional<IndexBounds> solid_index_bbox(const LabelVolume& v) {
    if (v.class_count(Label::SolidTumor) == 0) return std::nullopt;
    const GridGeometry& g = v.grid();
    IndexBounds b;
    b.lo[0] = g.dims[0]; b.lo[1] = g.dims[1]; b.lo[2] = g.dims[2];
    b.hi[0] = b.hi[1] = b.hi[2] = -1;
    const uint8_t* L = v.labels().data();
    size_t f = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++f) {
                if (L[f] != uint8_t(Label::SolidTumor)) continue;
                b.lo[0] = std::min(b.lo[0], i); b.hi[0] = std::max(b.hi[0], i);
                b.lo[1] = std::min(b.lo[1], j); b.hi[1] = std::max(b.hi[1], j);
                b.lo[2] = std::min(b.lo[2], k); b.hi[2] = std::max(b.hi[2], k);
            }
    return b;
}

// Per-class 3-D inclusive prefix sums for O(1) axis-aligned box counts.
struct ClassPrefix {
    std::array<int, 3> dims{};
    std::array<std::vector<int32_t>, kNumLabels> p;

    static ClassPrefix build(const LabelVolume& v) {
        const GridGeometry& g = v.grid();
        ClassPrefix cp;
        cp.dims = {g.dims[0], g.dims[1], g.dims[2]};
        const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
        const size_t plane = size_t(nx + 1) * size_t(ny + 1);
        for (auto& vec : cp.p) vec.assign(plane * size_t(nz + 1), 0);
        const uint8_t* L = v.labels().data();
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j) {
                size_t src = v.grid().index(0, j, k);
                for (int i = 0; i < nx; ++i, ++src) {
                    const size_t c = size_t(i + 1) + size_t(nx + 1) * size_t(j + 1) +
                                     plane * size_t(k + 1);
                    const size_t cx = c - 1;
                    const size_t cy = c - size_t(nx + 1);
                    const size_t cz = c - plane;
                    const size_t cxy = cy - 1, cxz = cz - 1;
                    const size_t cyz = cz - size_t(nx + 1), cxyz = cyz - 1;
                    for (int cls = 0; cls < kNumLabels; ++cls) {
                        int32_t* q = cp.p[cls].data();
                        q[c] = int32_t(L[src] == cls) + q[cx] + q[cy] + q[cz] - q[cxy] -
                               q[cxz] - q[cyz] + q[cxyz];
                    }
                }
            }
        return cp;
    }

    // Counts over the inclusive index range [lo, hi], pre-clamped to the grid.
    void query(const int lo[3], const int hi[3], int64_t out[kNumLabels]) const {
        const size_t row = size_t(dims[0] + 1), plane = row * size_t(dims[1] + 1);
        const size_t a0 = size_t(lo[0]), a1 = size_t(lo[1]), a2 = size_t(lo[2]);
        const size_t b0 = size_t(hi[0] + 1), b1 = size_t(hi[1] + 1), b2 = size_t(hi[2] + 1);
        for (int cls = 0; cls < kNumLabels; ++cls) {
            const int32_t* q = p[cls].data();
            out[cls] = int64_t(q[b0 + row * b1 + plane * b2]) - q[a0 + row * b1 + plane * b2] -
                       q[b0 + row * a1 + plane * b2] - q[b0 + row * b1 + plane * a2] +
                       q[a0 + row * a1 + plane * b2] + q[a0 + row * b1 + plane * a2] +
                       q[b0 + row * a1 + plane * a2] - q[a0 + row * a1 + plane * a2];
        }
    }
};

// dst[i] = min(src[max(0,i-w) .. min(n-1,i+w)]) via a monotonic index queue.
inline void sliding_min_1d(const double* src, double* dst, int n, int w,
                           std::vector<int>& queue) {
    queue.clear();
    size_t head = 0;
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int hi = std::min(n - 1, i + w);
        for (; next <= hi; ++next) {
            while (queue.size() > head && src[queue.back()] >= src[next]) queue.pop_back();
            queue.push_back(next);
        }
        while (queue[head] < i - w) ++head;
        dst[i] = src[queue[head]];
    }
}

// Minimum of a distance map over sliding axis-aligned windows, restricted to
// a padded region of interest. After build(), value(i,j,k) is the minimum of
// d over the inclusive window [i-w, i+w] (clamped to the grid) per axis —
// valid for query points at least one window-width inside the region, which
// the callers guarantee by padding the region with the largest window used.
struct RegionMinFilter {
    int lo[3] = {0, 0, 0};
    int n[3] = {0, 0, 0};
    std::vector<double> data;

    static RegionMinFilter build(const DistanceMap& d, const int region_lo[3],
                                 const int region_hi[3], const int w[3]) {
        RegionMinFilter f;
        for (int a = 0; a < 3; ++a) {
            f.lo[a] = region_lo[a];
            f.n[a] = region_hi[a] - region_lo[a] + 1;
        }
        const size_t total = size_t(f.n[0]) * size_t(f.n[1]) * size_t(f.n[2]);
        f.data.resize(total);
        std::vector<double> tmp(total);
        const GridGeometry& g = d.grid;
        for (int k = 0; k < f.n[2]; ++k)
            for (int j = 0; j < f.n[1]; ++j) {
                const size_t src = g.index(f.lo[0], f.lo[1] + j, f.lo[2] + k);
                std::copy_n(d.mm.data() + src, size_t(f.n[0]),
                            f.data.data() + f.flat(0, j, k));
            }
        std::vector<int> queue;
        std::vector<double> line_in(size_t(std::max({f.n[0], f.n[1], f.n[2]})));
        std::vector<double> line_out(line_in.size());
        // x pass (contiguous), then y, then z.
        for (int k = 0; k < f.n[2]; ++k)
            for (int j = 0; j < f.n[1]; ++j)
                sliding_min_1d(f.data.data() + f.flat(0, j, k),
                               tmp.data() + f.flat(0, j, k), f.n[0], w[0], queue);
        for (int k = 0; k < f.n[2]; ++k)
            for (int i = 0; i < f.n[0]; ++i) {
                for (int j = 0; j < f.n[1]; ++j) line_in[size_t(j)] = tmp[f.flat(i, j, k)];
                sliding_min_1d(line_in.data(), line_out.data(), f.n[1], w[1], queue);
                for (int j = 0; j < f.n[1]; ++j) f.data[f.flat(i, j, k)] = line_out[size_t(j)];
            }
        for (int j = 0; j < f.n[1]; ++j)
            for (int i = 0; i < f.n[0]; ++i) {
                for (int k = 0; k < f.n[2]; ++k) line_in[size_t(k)] = f.data[f.flat(i, j, k)];
                sliding_min_1d(line_in.data(), line_out.data(), f.n[2], w[2], queue);
                for (int k = 0; k < f.n[2]; ++k) f.data[f.flat(i, j, k)] = line_out[size_t(k)];
            }
        return f;
    }

    size_t flat(int i, int j, int k) const {
        return size_t(i) + size_t(n[0]) * (size_t(j) + size_t(n[1]) * size_t(k));
    }
    double value(int i, int j, int k) const {
        return data[flat(i - lo[0], j - lo[1], k - lo[2])];
    }
};

// Measures an axis-aligned box with center on a voxel center, counting whole
// voxels whose centers fall inside (boundary inclusive). Exact counterpart
// of overlap() in the limit of dense sampling, used by the coarse sweep.
inline TissueOverlap measure_axis_aligned(const ClassPrefix& cp, const GridGeometry& g,
                                          int64_t total_solid, const int ci[3],
                                          const int w[3], const RegionMinFilter& mf) {
    int lo[3], hi[3];
    bool any = true;
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0, ci[a] - w[a]);
        hi[a] = std::min(g.dims[a] - 1, ci[a] + w[a]);
        if (lo[a] > hi[a]) any = false;
    }
    TissueOverlap ov;
    if (!any) {
        ov.fsolid_outside = total_solid > 0 ? 1.0 : 0.0;
        ov.skull_distance_mm = std::numeric_limits<double>::infinity();
        return ov;
    }
    int64_t counts[kNumLabels];
    cp.query(lo, hi, counts);
    const int64_t total = int64_t(hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
    const double vox_ml = g.voxel_volume_ml();
    const int64_t solid_in = counts[int(Label::SolidTumor)];
    ov.fvoi_solid = double(solid_in) / double(total);
    ov.fvoi_periphery = double(counts[int(Label::Periphery)]) / double(total);
    ov.fvoi_necrosis = double(counts[int(Label::Necrosis)]) / double(total);
    ov.fvoi_normal = double(counts[int(Label::NormalBrain)]) / double(total);
    ov.solid_in_voi_ml = double(solid_in) * vox_ml;
    ov.vvoi_necrosis_ml = double(counts[int(Label::Necrosis)]) * vox_ml;
    ov.fsolid_outside =
        total_solid > 0 ? double(total_solid - solid_in) / double(total_solid) : 0.0;
    ov.skull_distance_mm = mf.value(ci[0], ci[1], ci[2]);
    return ov;
}

struct ScoredTheta {
    double score = -1;
    OrientedBox theta;
};

inline void keep_top(std::vector<ScoredTheta>& top, size_t k, double score,
                     const OrientedBox& theta) {
    if (top.size() == k && !better(score, theta, top.back().score, top.back().theta)) return;
    auto it = top.begin();
    while (it != top.end() && better(it->score, it->theta, score, theta)) ++it;
    top.insert(it, {score, theta});
    if (top.size() > k) top.pop_back();
}

inline std::vector<double> effective_coarse_lengths(const SearchConfig& cfg) {
    std::vector<double> ls;
    for (double l : cfg.coarse_lengths_mm)
        ls.push_back(std::clamp(l, cfg.len_min_mm, cfg.len_max_mm));
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    return ls;
}

inline std::vector<double> coarse_angle_values(const SearchConfig& cfg) {
    const double step = deg_to_rad(cfg.coarse_angle_step_deg);
    const int n = int(std::floor(cfg.coarse_angle_range_deg / cfg.coarse_angle_step_deg + 1e-9));
    std::vector<double> vals;
    for (int k = -n; k <= n; ++k) vals.push_back(k * step);
    return vals;
}

struct PatternOutcome {
    OrientedBox theta;
    ObjectiveBreakdown breakdown;
    TissueOverlap overlap;
};

inline double& theta_param(OrientedBox& t, int p) {
    switch (p) {
        case 0: return t.center.x;
        case 1: return t.center.y;
        case 2: return t.center.z;
        case 3: return t.lengths.x;
        case 4: return t.lengths.y;
        case 5: return t.lengths.z;
        case 6: return t.angles.x;
        case 7: return t.angles.y;
        default: return t.angles.z;
    }
}

// Coordinate-wise pattern search over the free parameters of theta: probe
// +/- the current step on each parameter, move to the best strict
// improvement, shrink all steps when none improves, stop once every step
// has bottomed out at its minimum (or the pass cap is hit).
inline PatternOutcome pattern_search(const LabelVolume& v, const DistanceMap& d,
                                     const PreferenceProfile& prof, const SearchConfig& cfg,
                                     OrientedBox start, bool free_center, const Vec3& center_lo,
                                     const Vec3& center_hi, int64_t& evaluations) {
    const int ss = cfg.refine_supersample;
    start.normalize();
    auto [bd0, ov0] = score_placement(start, v, d, prof, ss);
    ++evaluations;
    PatternOutcome cur{start, bd0, ov0};

    double center_step = cfg.init_center_step_mm;
    double length_step = cfg.init_length_step_mm;
    double angle_step = deg_to_rad(cfg.init_angle_step_deg);
    const double min_center = cfg.min_center_step_mm;
    const double min_length = cfg.min_length_step_mm;
    const double min_angle = deg_to_rad(cfg.min_angle_step_deg);
    const double eps = 1e-12;

    std::vector<OrientedBox> probes;
    std::vector<ObjectiveBreakdown> bds;
    std::vector<TissueOverlap> ovs;
    for (int pass = 0; pass < cfg.refine_passes; ++pass) {
        probes.clear();
        for (int p = 0; p < 9; ++p) {
            if (!free_center && p < 3) continue;
            const double step = p < 3 ? center_step : (p < 6 ? length_step : angle_step);
            for (int sgn : {+1, -1}) {
                OrientedBox t = cur.theta;
                theta_param(t, p) += sgn * step;
                if (p < 3) {
                    t.center.x = std::clamp(t.center.x, center_lo.x, center_hi.x);
                    t.center.y = std::clamp(t.center.y, center_lo.y, center_hi.y);
                    t.center.z = std::clamp(t.center.z, center_lo.z, center_hi.z);
                } else if (p < 6) {
                    theta_param(t, p) =
                        std::clamp(theta_param(t, p), cfg.len_min_mm, cfg.len_max_mm);
                } else {
                    t.normalize();
                }
                if (t == cur.theta) continue;
                probes.push_back(t);
            }
        }
        bds.assign(probes.size(), {});
        ovs.assign(probes.size(), {});
        parallel_for(int64_t(probes.size()), cfg.threads, [&](int64_t i) {
            auto [bd, ov] = score_placement(probes[size_t(i)], v, d, prof, ss);
            bds[size_t(i)] = bd;
            ovs[size_t(i)] = ov;
        });
        evaluations += int64_t(probes.size());
        int best = -1;
        for (size_t i = 0; i < probes.size(); ++i)
            if (best < 0 || better(bds[i].total, probes[i], bds[size_t(best)].total,
                                   probes[size_t(best)]))
                best = int(i);
        if (best >= 0 && bds[size_t(best)].total > cur.breakdown.total) {
            cur = {probes[size_t(best)], bds[size_t(best)], ovs[size_t(best)]};
            continue;
        }
        const bool all_min = (!free_center || center_step <= min_center + eps) &&
                             length_step <= min_length + eps && angle_step <= min_angle + eps;
        if (all_min) break;
        center_step = std::max(min_center, center_step * cfg.shrink);
        length_step = std::max(min_length, length_step * cfg.shrink);
        angle_step = std::max(min_angle, angle_step * cfg.shrink);
    }
    return cur;
}

// Applies the coarse angle grid to each seed placement and returns the best
// (seed, angles) pair at the coarse supersample, including the unrotated
// seeds themselves.
inline ScoredTheta best_angle_seed(const LabelVolume& v, const DistanceMap& d,
                                   const PreferenceProfile& prof, const SearchConfig& cfg,
                                   const std::vector<ScoredTheta>& seeds,
                                   int64_t& evaluations) {
    const auto angles = coarse_angle_values(cfg);
    std::vector<OrientedBox> probes;
    for (const auto& s : seeds) {
        OrientedBox base = s.theta;
        for (double az : angles)
            for (double ay : angles)
                for (double ax : angles) {
                    OrientedBox t = base;
                    t.angles = {az, ay, ax};
                    probes.push_back(t);
                }
    }
    std::vector<double> scores(probes.size(), -1);
    parallel_for(int64_t(probes.size()), cfg.threads, [&](int64_t i) {
        auto [bd, ov] = score_placement(probes[size_t(i)], v, d, prof, cfg.coarse_supersample);
        (void)ov;
        scores[size_t(i)] = bd.total;
    });
    evaluations += int64_t(probes.size());
    ScoredTheta best;
    bool have = false;
    for (size_t i = 0; i < probes.size(); ++i)
        if (!have || better(scores[i], probes[i], best.score, best.theta)) {
            best = {scores[i], probes[i]};
            have = true;
        }
    return best;
}

}  // namespace detail

// Cubic lattice of candidate centers anchored at the solid-tumor centroid,
// spaced so each point owns `interval_ml` of volume; the interval grows
// adaptively until at most `cap` points land on solid tumor.
struct CenterSamples {
    std::vector<Vec3> points;
    double effective_interval_ml = 0;
};

inline CenterSamples sample_centers(const LabelVolume& v, double interval_ml, int cap) {
    if (!(interval_ml > 0)) throw std::invalid_argument("sampling interval must be > 0");
    if (cap < 1) throw std::invalid_argument("center cap must be >= 1");
    const auto bbox = detail::solid_index_bbox(v);
    if (!bbox) throw DataError("volume contains no solid tumor");
    const GridGeometry& g = v.grid();
    const uint8_t* L = v.labels().data();

    Vec3 centroid{0, 0, 0};
    int64_t n_solid = 0;
    for (int k = bbox->lo[2]; k <= bbox->hi[2]; ++k)
        for (int j = bbox->lo[1]; j <= bbox->hi[1]; ++j)
            for (int i = bbox->lo[0]; i <= bbox->hi[0]; ++i)
                if (L[g.index(i, j, k)] == uint8_t(Label::SolidTumor)) {
                    centroid += g.world(i, j, k);
                    ++n_solid;
                }
    centroid = centroid / double(n_solid);
    const double solid_ml = double(n_solid) * g.voxel_volume_ml();

    const Vec3 lo_mm = g.world(bbox->lo[0], bbox->lo[1], bbox->lo[2]) - g.spacing * 0.5;
    const Vec3 hi_mm = g.world(bbox->hi[0], bbox->hi[1], bbox->hi[2]) + g.spacing * 0.5;

    CenterSamples out;
    double interval = interval_ml;
    while (true) {
        const double s = std::cbrt(1000.0 * interval);
        out.points.clear();
        const int ilo[3] = {int(std::ceil((lo_mm.x - centroid.x) / s - 1e-9)),
                            int(std::ceil((lo_mm.y - centroid.y) / s - 1e-9)),
                            int(std::ceil((lo_mm.z - centroid.z) / s - 1e-9))};
        const int ihi[3] = {int(std::floor((hi_mm.x - centroid.x) / s + 1e-9)),
                            int(std::floor((hi_mm.y - centroid.y) / s + 1e-9)),
                            int(std::floor((hi_mm.z - centroid.z) / s + 1e-9))};
        for (int a = ilo[0]; a <= ihi[0]; ++a)
            for (int b = ilo[1]; b <= ihi[1]; ++b)
                for (int c = ilo[2]; c <= ihi[2]; ++c) {
                    const Vec3 p = centroid + Vec3{double(a), double(b), double(c)} * s;
                    const auto idx = g.nearest_index(p);
                    if (!g.in_bounds(idx[0], idx[1], idx[2])) continue;
                    if (L[g.index(idx[0], idx[1], idx[2])] == uint8_t(Label::SolidTumor))
                        out.points.push_back(p);
                }
        if (int(out.points.size()) <= cap) break;
        // Adaptive growth: the volumetric estimate, or a fixed factor when
        // that estimate no longer strictly increases the interval.
        interval = std::max(solid_ml / double(cap), interval * 1.25);
    }
    if (out.points.empty()) {
        // Lattice so coarse (or tumor so concave) that no point landed on
        // solid tissue: fall back to the solid voxel center nearest the
        // centroid, keeping the guarantee of at least one sample.
        Vec3 best{0, 0, 0};
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int k = bbox->lo[2]; k <= bbox->hi[2]; ++k)
            for (int j = bbox->lo[1]; j <= bbox->hi[1]; ++j)
                for (int i = bbox->lo[0]; i <= bbox->hi[0]; ++i) {
                    if (L[g.index(i, j, k)] != uint8_t(Label::SolidTumor)) continue;
                    const Vec3 p = g.world(i, j, k);
                    const double d2 = (p - centroid).dot(p - centroid);
                    if (d2 < best_d2 || (d2 == best_d2 && lex_less(p, best))) {
                        best = p;
                        best_d2 = d2;
                    }
                }
        out.points.push_back(best);
    }
    std::sort(out.points.begin(), out.points.end(),
              [](const Vec3& a, const Vec3& b) { return lex_less(a, b); });
    out.effective_interval_ml = interval;
    return out;
}

// Full 9-parameter search: coarse axis-aligned sweep over a voxel-aligned
// center lattice (exact whole-voxel counting via prefix sums), coarse angle
// grid on the best seeds, then pattern-search refinement.
inline PlacementResult search_full(const LabelVolume& v, const DistanceMap& d,
                                   const PreferenceProfile& p, const SearchConfig& cfg) {
    cfg.validate();
    p.validate();
    if (!(d.grid == v.grid())) throw DataError("distance map grid does not match volume");
    const auto bbox = detail::solid_index_bbox(v);
    if (!bbox) throw DataError("volume contains no solid tumor");
    const GridGeometry& g = v.grid();
    const double dilate = cfg.len_max_mm / 2.0;
    const Vec3 bb_lo = g.world(bbox->lo[0], bbox->lo[1], bbox->lo[2]);
    const Vec3 bb_hi = g.world(bbox->hi[0], bbox->hi[1], bbox->hi[2]);
    const Vec3 center_lo = bb_lo - Vec3{dilate, dilate, dilate};
    const Vec3 center_hi = bb_hi + Vec3{dilate, dilate, dilate};

    int64_t evaluations = 0;

    // Center lattice: voxel centers covering the dilated bounding box.
    int clo[3], chi[3], cstep[3], ncent[3];
    for (int a = 0; a < 3; ++a) {
        clo[a] = std::max(0, int(std::ceil((center_lo[a] - g.origin[a]) / g.spacing[a] - 1e-9)));
        chi[a] = std::min(g.dims[a] - 1,
                          int(std::floor((center_hi[a] - g.origin[a]) / g.spacing[a] + 1e-9)));
        cstep[a] = std::max(1, int(std::lround(cfg.coarse_center_step_mm / g.spacing[a])));
        ncent[a] = chi[a] >= clo[a] ? (chi[a] - clo[a]) / cstep[a] + 1 : 0;
    }
    const auto lengths = detail::effective_coarse_lengths(cfg);
    const int nlen = int(lengths.size());
    const int ncombo = nlen * nlen * nlen;
    const int64_t ncenters = int64_t(ncent[0]) * ncent[1] * ncent[2];
    if (ncenters == 0) throw DataError("solid tumor lies outside the volume's field of view");

    const auto prefix = detail::ClassPrefix::build(v);
    const int64_t total_solid = v.class_count(Label::SolidTumor);

    // Region of interest for distance-minimum filters: the center lattice
    // padded by the largest window so every query window stays inside.
    int wmax[3], rlo[3], rhi[3];
    for (int a = 0; a < 3; ++a) {
        wmax[a] = int(std::floor(lengths.back() / 2.0 / g.spacing[a] + 1e-9));
        rlo[a] = std::max(0, clo[a] - wmax[a] - 1);
        rhi[a] = std::min(g.dims[a] - 1, chi[a] + wmax[a] + 1);
    }

    // Stage 1: axis-aligned sweep, one length combination at a time so the
    // distance filter for that combination is built once and reused.
    const int keep = std::max(1, cfg.angle_seeds_full);
    std::vector<std::vector<detail::ScoredTheta>> per_combo_top(static_cast<size_t>(ncombo));
    parallel_for(ncombo, cfg.threads, [&](int64_t combo) {
        const double L[3] = {lengths[size_t(combo % nlen)],
                             lengths[size_t((combo / nlen) % nlen)],
                             lengths[size_t(combo / (nlen * nlen))]};
        int w[3];
        for (int a = 0; a < 3; ++a) w[a] = int(std::floor(L[a] / 2.0 / g.spacing[a] + 1e-9));
        const auto mf = detail::RegionMinFilter::build(d, rlo, rhi, w);
        auto& top = per_combo_top[size_t(combo)];
        for (int k = clo[2]; k <= chi[2]; k += cstep[2])
            for (int j = clo[1]; j <= chi[1]; j += cstep[1])
                for (int i = clo[0]; i <= chi[0]; i += cstep[0]) {
                    const int ci[3] = {i, j, k};
                    const auto ov =
                        detail::measure_axis_aligned(prefix, g, total_solid, ci, w, mf);
                    OrientedBox t;
                    t.center = g.world(i, j, k);
                    t.lengths = {L[0], L[1], L[2]};
                    const auto bd = evaluate(t, ov, p);
                    detail::keep_top(top, size_t(keep), bd.total, t);
                }
    });
    evaluations += ncenters * ncombo;

    std::vector<detail::ScoredTheta> top;
    for (const auto& ct : per_combo_top)
        for (const auto& st : ct) detail::keep_top(top, size_t(keep), st.score, st.theta);

    // Stage 2: coarse angle grid on the strongest axis-aligned seeds.
    const auto coarse = detail::best_angle_seed(v, d, p, cfg, top, evaluations);

    // Stage 3: pattern-search refinement of all nine parameters.
    auto [bd_seed, ov_seed] = score_placement(coarse.theta, v, d, p, cfg.refine_supersample);
    ++evaluations;
    const auto refined = detail::pattern_search(v, d, p, cfg, coarse.theta, true, center_lo,
                                                center_hi, evaluations);

    PlacementResult res;
    res.theta = refined.theta;
    res.breakdown = refined.breakdown;
    res.overlap = refined.overlap;
    res.provenance = {SearchProvenance::Kind::Full, -1, p.name};
    res.evaluations = evaluations;
    res.coarse_theta = coarse.theta;
    res.coarse_total = bd_seed.total;
    (void)ov_seed;
    return res;
}

// 6-parameter search with the center frozen: coarse length sweep and angle
// grid at the given point, then pattern search over lengths and angles only.
inline PlacementResult search_conditioned(const LabelVolume& v, const DistanceMap& d,
                                          const PreferenceProfile& p, const Vec3& center,
                                          const SearchConfig& cfg) {
    cfg.validate();
    p.validate();
    if (!(d.grid == v.grid())) throw DataError("distance map grid does not match volume");
    if (!detail::solid_index_bbox(v)) throw DataError("volume contains no solid tumor");
    const GridGeometry& g = v.grid();
    const auto idx = g.nearest_index(center);
    if (!g.in_bounds(idx[0], idx[1], idx[2]))
        throw DataError("conditioned center lies outside the field of view");
    if (v.labels()[g.index(idx[0], idx[1], idx[2])] == uint8_t(Label::NonBrain))
        throw DataError("conditioned center lies outside the brain");

    int64_t evaluations = 0;
    const auto lengths = detail::effective_coarse_lengths(cfg);
    const int nlen = int(lengths.size());
    std::vector<OrientedBox> probes;
    for (int c = 0; c < nlen; ++c)
        for (int b = 0; b < nlen; ++b)
            for (int a = 0; a < nlen; ++a) {
                OrientedBox t;
                t.center = center;
                t.lengths = {lengths[size_t(a)], lengths[size_t(b)], lengths[size_t(c)]};
                probes.push_back(t);
            }
    std::vector<double> scores(probes.size(), -1);
    parallel_for(int64_t(probes.size()), cfg.threads, [&](int64_t i) {
        auto [bd, ov] = score_placement(probes[size_t(i)], v, d, p, cfg.coarse_supersample);
        (void)ov;
        scores[size_t(i)] = bd.total;
    });
    evaluations += int64_t(probes.size());

    std::vector<detail::ScoredTheta> top;
    for (size_t i = 0; i < probes.size(); ++i)
        detail::keep_top(top, size_t(std::max(1, cfg.angle_seeds_conditioned)), scores[i],
                         probes[i]);
    const auto coarse = detail::best_angle_seed(v, d, p, cfg, top, evaluations);

    auto [bd_seed, ov_seed] = score_placement(coarse.theta, v, d, p, cfg.refine_supersample);
    ++evaluations;
    const auto refined =
        detail::pattern_search(v, d, p, cfg, coarse.theta, false, center, center, evaluations);

    PlacementResult res;
    res.theta = refined.theta;
    res.breakdown = refined.breakdown;
    res.overlap = refined.overlap;
    res.provenance = {SearchProvenance::Kind::Conditioned, -1, p.name};
    res.evaluations = evaluations;
    res.coarse_theta = coarse.theta;
    res.coarse_total = bd_seed.total;
    (void)ov_seed;
    return res;
}

struct Candidate {
    std::string id;
    PlacementResult placement;
};

struct CandidateSet {
    GridGeometry grid;  // grid the candidates were generated on
    std::vector<Candidate> candidates;
    std::vector<Vec3> centers;
    double effective_interval_ml = 0;
    std::vector<std::string> profile_names;
};

namespace detail {

inline bool near_duplicate(const OrientedBox& a, const OrientedBox& b) {
    const double tol_mm = 0.1;
    const double tol_rad = deg_to_rad(0.1);
    for (int i = 0; i < 3; ++i) {
        if (std::abs(a.center[i] - b.center[i]) > tol_mm) return false;
        if (std::abs(a.lengths[i] - b.lengths[i]) > tol_mm) return false;
        if (std::abs(normalize_angle(a.angles[i] - b.angles[i])) > tol_rad) return false;
    }
    return true;
}

}  // namespace detail

// Candidate generation: one full-search reference placement under the
// balanced profile, plus one conditioned placement per (profile, sampled
// center), with near-duplicates collapsed in provenance order.
inline CandidateSet generate_candidates(const LabelVolume& v, const DistanceMap& d,
                                        const std::vector<PreferenceProfile>& profiles,
                                        const SearchConfig& cfg, double interval_ml = 0.5,
                                        int cap = 50) {
    CandidateSet set;
    set.grid = v.grid();
    const auto samples = sample_centers(v, interval_ml, cap);
    set.centers = samples.points;
    set.effective_interval_ml = samples.effective_interval_ml;
    for (const auto& prof : profiles) set.profile_names.push_back(prof.name);

    std::vector<PlacementResult> results;
    results.push_back(search_full(v, d, balanced_profile(), cfg));

    const int ncenters = int(samples.points.size());
    std::vector<PlacementResult> conditioned(size_t(profiles.size()) * size_t(ncenters));
    // Conditioned searches are independent; parallelize across them and keep
    // the assembly order fixed (profile-major, then center index).
    parallel_for(int64_t(conditioned.size()), cfg.threads, [&](int64_t i) {
        const size_t pi = size_t(i) / size_t(ncenters);
        const int ci = int(size_t(i) % size_t(ncenters));
        SearchConfig inner = cfg;
        inner.threads = 1;  // determinism-neutral; avoids nested thread storms
        auto r = search_conditioned(v, d, profiles[pi], samples.points[size_t(ci)], inner);
        r.provenance.center_index = ci;
        conditioned[size_t(i)] = std::move(r);
    });
    for (auto& r : conditioned) results.push_back(std::move(r));

    for (auto& r : results) {
        bool dup = false;
        for (const auto& kept : set.candidates)
            if (detail::near_duplicate(kept.placement.theta, r.theta)) {
                dup = true;
                break;
            }
        if (dup) continue;
        Candidate c;
        c.id = "c" + std::to_string(set.candidates.size() + 1);
        c.placement = std::move(r);
        set.candidates.push_back(std::move(c));
    }
    return set;
}

}  // namespace voiplace

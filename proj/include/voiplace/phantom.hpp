#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "voiplace/search.hpp"

namespace voiplace {

// Synthetic case: a spherical brain containing one tumor (ellipsoid, or an
// oriented box when box_lengths_mm is set — the mode used to construct cases
// whose optimal placement is known exactly), an optional concentric necrotic
// core, and an optional periphery shell grown outward from the tumor surface.
struct PhantomSpec {
    Vec3 brain_center_mm{0, 0, 0};
    double brain_radius_mm = 80;

    Vec3 tumor_center_mm{0, 0, 0};
    Vec3 tumor_radii_mm{12, 12, 12};
    Vec3 tumor_angles{0, 0, 0};  // radians, same convention as OrientedBox
    std::optional<Vec3> box_lengths_mm;

    std::optional<Vec3> core_radii_mm;        // necrosis, concentric with the tumor
    std::optional<double> shell_thickness_mm;  // periphery, grown outward

    std::array<int, 3> dims{128, 128, 128};
    Vec3 spacing_mm{2, 2, 2};
    uint64_t seed = 0;  // carried by suite generators for provenance

    GridGeometry grid() const {
        GridGeometry g;
        g.dims = dims;
        g.spacing = spacing_mm;
        // Center the field of view on the brain.
        g.origin = brain_center_mm - Vec3{spacing_mm.x * (dims[0] - 1) * 0.5,
                                          spacing_mm.y * (dims[1] - 1) * 0.5,
                                          spacing_mm.z * (dims[2] - 1) * 0.5};
        return g;
    }

    void validate() const {
        grid().validate();
        if (!(brain_radius_mm > 0)) throw std::invalid_argument("brain radius must be > 0");
        double tumor_reach;
        if (box_lengths_mm) {
            if (!(box_lengths_mm->x > 0 && box_lengths_mm->y > 0 && box_lengths_mm->z > 0))
                throw std::invalid_argument("tumor box lengths must be positive");
            tumor_reach = (*box_lengths_mm * 0.5).norm();
        } else {
            if (!(tumor_radii_mm.x > 0 && tumor_radii_mm.y > 0 && tumor_radii_mm.z > 0))
                throw std::invalid_argument("tumor radii must be positive");
            tumor_reach = std::max({tumor_radii_mm.x, tumor_radii_mm.y, tumor_radii_mm.z});
        }
        if ((tumor_center_mm - brain_center_mm).norm() + tumor_reach > brain_radius_mm)
            throw std::invalid_argument("tumor must lie inside the brain sphere");
        if (core_radii_mm) {
            const Vec3 bound = box_lengths_mm ? *box_lengths_mm * 0.5 : tumor_radii_mm;
            if (!(core_radii_mm->x > 0 && core_radii_mm->y > 0 && core_radii_mm->z > 0) ||
                core_radii_mm->x >= bound.x || core_radii_mm->y >= bound.y ||
                core_radii_mm->z >= bound.z)
                throw std::invalid_argument("necrotic core must be strictly inside the tumor");
        }
        if (shell_thickness_mm && !(*shell_thickness_mm > 0))
            throw std::invalid_argument("periphery thickness must be > 0");
    }
};

namespace detail {

inline bool in_ellipsoid(const Vec3& q, const Vec3& radii) {
    const double a = q.x / radii.x, b = q.y / radii.y, c = q.z / radii.z;
    return a * a + b * b + c * c <= 1.0;
}

inline bool in_box(const Vec3& q, const Vec3& half) {
    return std::abs(q.x) <= half.x && std::abs(q.y) <= half.y && std::abs(q.z) <= half.z;
}

}  // namespace detail

// Labels each voxel center by region-membership precedence:
// necrosis > solid tumor > periphery > normal brain > non-brain.
// The periphery of an ellipsoid tumor is approximated by the ellipsoid with
// radii grown by the shell thickness (exact for spheres).
inline LabelVolume generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const GridGeometry g = spec.grid();
    const Mat3 rot = rotation_zyx(spec.tumor_angles);
    const Vec3 half = spec.box_lengths_mm ? *spec.box_lengths_mm * 0.5 : Vec3{0, 0, 0};
    const double shell = spec.shell_thickness_mm.value_or(0.0);
    const double brain_r2 = spec.brain_radius_mm * spec.brain_radius_mm;

    std::vector<uint8_t> labels(g.voxel_count(), uint8_t(Label::NonBrain));
    size_t f = 0;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i, ++f) {
                const Vec3 p = g.world(i, j, k);
                const Vec3 db = p - spec.brain_center_mm;
                const bool in_brain = db.dot(db) <= brain_r2;
                const Vec3 q = rot.apply_transposed(p - spec.tumor_center_mm);

                Label l = in_brain ? Label::NormalBrain : Label::NonBrain;
                bool in_tumor, in_shell;
                if (spec.box_lengths_mm) {
                    in_tumor = detail::in_box(q, half);
                    in_shell = shell > 0 &&
                               detail::in_box(q, half + Vec3{shell, shell, shell});
                } else {
                    in_tumor = detail::in_ellipsoid(q, spec.tumor_radii_mm);
                    in_shell = shell > 0 &&
                               detail::in_ellipsoid(
                                   q, spec.tumor_radii_mm + Vec3{shell, shell, shell});
                }
                if (spec.core_radii_mm && detail::in_ellipsoid(q, *spec.core_radii_mm))
                    l = Label::Necrosis;
                else if (in_tumor)
                    l = Label::SolidTumor;
                else if (in_shell)
                    l = Label::Periphery;
                labels[f] = uint8_t(l);
            }
    return LabelVolume(g, std::move(labels));
}

// The fixture used across the test suite: a 24 mm solid cube centered on a
// voxel corner, deep inside a large brain. By construction the cube covers
// exactly 12^3 voxels (13.824 mL), and the box that covers it exactly scores
// a perfect 1.0 under the balanced objective.
// Fixture with a known-by-construction optimum. On the standard grid the
// voxel centers sit at odd world coordinates, so a 24 mm box centered on the
// voxel corner (2,2,2) captures exactly 12 voxel centers per axis and the
// rasterized solid field spans exactly [-10, 14] mm — a 24 mm VOI at the same
// center covers it perfectly: fvoi_solid = 1, fsolid_outside = 0, 13.824 mL.
inline PhantomSpec cube_phantom_spec() {
    PhantomSpec s;
    s.brain_center_mm = {0, 0, 0};
    s.brain_radius_mm = 80;
    s.tumor_center_mm = {2, 2, 2};
    s.box_lengths_mm = Vec3{24, 24, 24};
    return s;
}

inline nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
    nlohmann::json j;
    j["brain"] = {{"center_mm", {s.brain_center_mm.x, s.brain_center_mm.y, s.brain_center_mm.z}},
                  {"radius_mm", s.brain_radius_mm}};
    nlohmann::json tumor{
        {"center_mm", {s.tumor_center_mm.x, s.tumor_center_mm.y, s.tumor_center_mm.z}},
        {"angles_deg",
         {rad_to_deg(s.tumor_angles.x), rad_to_deg(s.tumor_angles.y),
          rad_to_deg(s.tumor_angles.z)}}};
    if (s.box_lengths_mm)
        tumor["box_lengths_mm"] = {s.box_lengths_mm->x, s.box_lengths_mm->y,
                                   s.box_lengths_mm->z};
    else
        tumor["radii_mm"] = {s.tumor_radii_mm.x, s.tumor_radii_mm.y, s.tumor_radii_mm.z};
    j["tumor"] = tumor;
    if (s.core_radii_mm)
        j["core_radii_mm"] = {s.core_radii_mm->x, s.core_radii_mm->y, s.core_radii_mm->z};
    if (s.shell_thickness_mm) j["shell_thickness_mm"] = *s.shell_thickness_mm;
    j["grid"] = {{"dims", {s.dims[0], s.dims[1], s.dims[2]}},
                 {"spacing_mm", {s.spacing_mm.x, s.spacing_mm.y, s.spacing_mm.z}}};
    j["seed"] = s.seed;
    return j;
}

inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
    PhantomSpec s;
    try {
        const auto& brain = j.at("brain");
        const auto& bc = brain.at("center_mm");
        s.brain_center_mm = {bc.at(0), bc.at(1), bc.at(2)};
        s.brain_radius_mm = brain.at("radius_mm");
        const auto& tumor = j.at("tumor");
        const auto& tc = tumor.at("center_mm");
        s.tumor_center_mm = {tc.at(0), tc.at(1), tc.at(2)};
        if (tumor.contains("angles_deg")) {
            const auto& ta = tumor.at("angles_deg");
            s.tumor_angles = {deg_to_rad(ta.at(0)), deg_to_rad(ta.at(1)), deg_to_rad(ta.at(2))};
        }
        if (tumor.contains("box_lengths_mm")) {
            const auto& bl = tumor.at("box_lengths_mm");
            s.box_lengths_mm = Vec3{bl.at(0), bl.at(1), bl.at(2)};
        } else {
            const auto& tr = tumor.at("radii_mm");
            s.tumor_radii_mm = {tr.at(0), tr.at(1), tr.at(2)};
        }
        if (j.contains("core_radii_mm")) {
            const auto& cr = j.at("core_radii_mm");
            s.core_radii_mm = Vec3{cr.at(0), cr.at(1), cr.at(2)};
        }
        if (j.contains("shell_thickness_mm")) s.shell_thickness_mm = j.at("shell_thickness_mm");
        if (j.contains("grid")) {
            const auto& grid = j.at("grid");
            const auto& dims = grid.at("dims");
            s.dims = {dims.at(0), dims.at(1), dims.at(2)};
            const auto& sp = grid.at("spacing_mm");
            s.spacing_mm = {sp.at(0), sp.at(1), sp.at(2)};
        }
        if (j.contains("seed")) s.seed = j.at("seed");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

namespace detail {

// Uniform double in [0,1) from the top 53 bits; portable across standard
// library implementations, unlike std::uniform_real_distribution.
inline double u01(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * u01(rng);
}

}  // namespace detail

// Seeded randomized suite of ellipsoid-tumor cases (the benchmark substrate).
inline std::vector<PhantomSpec> default_suite(int n = 20, uint64_t seed = 1729) {
    std::mt19937_64 rng(seed);
    std::vector<PhantomSpec> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        PhantomSpec s;
        s.seed = seed;
        s.brain_radius_mm = detail::uniform(rng, 72, 82);
        const double off = detail::uniform(rng, 0, 22);
        const double az = detail::uniform(rng, 0, 2 * M_PI);
        const double cz = detail::uniform(rng, -0.6, 0.6);
        const double sxy = std::sqrt(std::max(0.0, 1 - cz * cz));
        s.tumor_center_mm = Vec3{std::cos(az) * sxy, std::sin(az) * sxy, cz} * off;
        // Snap to whole millimeters: keeps specs compact and reproducible.
        s.tumor_center_mm = {std::round(s.tumor_center_mm.x), std::round(s.tumor_center_mm.y),
                             std::round(s.tumor_center_mm.z)};
        s.tumor_radii_mm = {detail::uniform(rng, 9, 16), detail::uniform(rng, 9, 16),
                            detail::uniform(rng, 9, 16)};
        s.tumor_angles = {deg_to_rad(detail::uniform(rng, -30, 30)),
                          deg_to_rad(detail::uniform(rng, -30, 30)),
                          deg_to_rad(detail::uniform(rng, -30, 30))};
        if (detail::u01(rng) < 0.5)
            s.core_radii_mm = s.tumor_radii_mm * detail::uniform(rng, 0.3, 0.55);
        if (detail::u01(rng) < 0.7) s.shell_thickness_mm = detail::uniform(rng, 2, 6);
        out.push_back(s);
    }
    return out;
}

// Seeded box-tumor cases: axis-aligned solid boxes with whole-millimeter
// geometry, built for comparison against the exhaustive axis-aligned oracle.
inline std::vector<PhantomSpec> box_suite(int n = 10, uint64_t seed = 271828) {
    std::mt19937_64 rng(seed);
    std::vector<PhantomSpec> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        PhantomSpec s;
        s.seed = seed;
        s.brain_radius_mm = 80;
        s.tumor_center_mm = {std::round(detail::uniform(rng, -15, 15)),
                             std::round(detail::uniform(rng, -15, 15)),
                             std::round(detail::uniform(rng, -15, 15))};
        s.box_lengths_mm = Vec3{std::round(detail::uniform(rng, 18, 36)),
                                std::round(detail::uniform(rng, 18, 36)),
                                std::round(detail::uniform(rng, 18, 36))};
        if (detail::u01(rng) < 0.3)
            s.core_radii_mm = *s.box_lengths_mm * 0.5 * detail::uniform(rng, 0.3, 0.5);
        if (detail::u01(rng) < 0.7)
            s.shell_thickness_mm = std::round(detail::uniform(rng, 2, 6));
        out.push_back(s);
    }
    return out;
}

// Exhaustive search over axis-aligned boxes with centers on every voxel
// center of the dilated solid bounding box and lengths on the given lattice.
// Measurement is exact whole-voxel counting (supersampling-free), making
// this an oracle that shares no code path with the sampled overlap kernel.
// Boxes that touch no solid tumor are omitted from enumeration: any such box
// scores at most gaussian(0;1,sigma_solid) * gaussian(1;0,sigma_missed),
// which the returned optimum must beat (asserted below).
struct OracleGrid {
    std::vector<double> lengths_mm = {16, 24, 32, 40};
    double dilate_mm = 25;          // center range beyond the solid bounding box
    int64_t max_evaluations = 40'000'000;  // runtime guard
};

inline PlacementResult brute_force_best_axis_aligned(const LabelVolume& v,
                                                     const DistanceMap& d,
                                                     const PreferenceProfile& p,
                                                     const OracleGrid& grid = {}) {
    p.validate();
    if (!(d.grid == v.grid())) throw DataError("distance map grid does not match volume");
    const auto bbox = detail::solid_index_bbox(v);
    if (!bbox) throw DataError("volume contains no solid tumor");
    if (grid.lengths_mm.empty()) throw std::invalid_argument("oracle needs a length lattice");
    const GridGeometry& g = v.grid();

    std::vector<double> lengths = grid.lengths_mm;
    std::sort(lengths.begin(), lengths.end());
    const int nlen = int(lengths.size());

    int clo[3], chi[3];
    for (int a = 0; a < 3; ++a) {
        clo[a] = std::max(0, bbox->lo[a] - int(std::ceil(grid.dilate_mm / g.spacing[a])));
        chi[a] = std::min(g.dims[a] - 1,
                          bbox->hi[a] + int(std::ceil(grid.dilate_mm / g.spacing[a])));
    }
    const int64_t ncenters =
        int64_t(chi[0] - clo[0] + 1) * (chi[1] - clo[1] + 1) * (chi[2] - clo[2] + 1);
    const int64_t ncombo = int64_t(nlen) * nlen * nlen;
    if (ncenters * ncombo > grid.max_evaluations)
        throw std::invalid_argument(
            "oracle instance too large: " + std::to_string(ncenters * ncombo) +
            " evaluations exceed the guard of " + std::to_string(grid.max_evaluations));

    const auto prefix = detail::ClassPrefix::build(v);
    const int64_t total_solid = v.class_count(Label::SolidTumor);

    int wmax[3], rlo[3], rhi[3];
    for (int a = 0; a < 3; ++a) {
        wmax[a] = int(std::floor(lengths.back() / 2.0 / g.spacing[a] + 1e-9));
        rlo[a] = std::max(0, clo[a] - wmax[a] - 1);
        rhi[a] = std::min(g.dims[a] - 1, chi[a] + wmax[a] + 1);
    }

    struct Best {
        double score = -1;
        OrientedBox theta;
        ObjectiveBreakdown bd;
        TissueOverlap ov;
        bool have = false;
    };
    std::vector<Best> per_combo(static_cast<size_t>(ncombo));
    parallel_for(ncombo, 0, [&](int64_t combo) {
        const double L[3] = {lengths[size_t(combo % nlen)],
                             lengths[size_t((combo / nlen) % nlen)],
                             lengths[size_t(combo / (nlen * nlen))]};
        int w[3];
        for (int a = 0; a < 3; ++a) w[a] = int(std::floor(L[a] / 2.0 / g.spacing[a] + 1e-9));
        const auto mf = detail::RegionMinFilter::build(d, rlo, rhi, w);
        Best best;
        for (int k = clo[2]; k <= chi[2]; ++k)
            for (int j = clo[1]; j <= chi[1]; ++j)
                for (int i = clo[0]; i <= chi[0]; ++i) {
                    // Skip boxes that cannot contain any solid voxel center.
                    if (i + w[0] < bbox->lo[0] || i - w[0] > bbox->hi[0] ||
                        j + w[1] < bbox->lo[1] || j - w[1] > bbox->hi[1] ||
                        k + w[2] < bbox->lo[2] || k - w[2] > bbox->hi[2])
                        continue;
                    const int ci[3] = {i, j, k};
                    const auto ov =
                        detail::measure_axis_aligned(prefix, g, total_solid, ci, w, mf);
                    OrientedBox t;
                    t.center = g.world(i, j, k);
                    t.lengths = {L[0], L[1], L[2]};
                    const auto bd = evaluate(t, ov, p);
                    if (!best.have ||
                        detail::better(bd.total, t, best.score, best.theta)) {
                        best = {bd.total, t, bd, ov, true};
                    }
                }
        per_combo[size_t(combo)] = best;
    });

    Best best;
    for (const auto& b : per_combo)
        if (b.have && (!best.have || detail::better(b.score, b.theta, best.score, best.theta)))
            best = b;
    if (!best.have) throw DataError("oracle enumerated no placement touching solid tumor");

    // Any box with zero solid content scores at most this bound; the pruned
    // enumeration is therefore exhaustive if the optimum beats it.
    const double zero_solid_bound =
        gaussian_term(0, p.terms[int(Term::VoiSolid)].mu, p.terms[int(Term::VoiSolid)].sigma) *
        gaussian_term(1, p.terms[int(Term::SolidOutside)].mu,
                      p.terms[int(Term::SolidOutside)].sigma);
    if (best.score <= zero_solid_bound)
        throw DataError("oracle optimum does not dominate solid-free placements");

    PlacementResult res;
    res.theta = best.theta;
    res.breakdown = best.bd;
    res.overlap = best.ov;
    res.provenance = {SearchProvenance::Kind::Full, -1, p.name + " (oracle)"};
    res.evaluations = ncenters * ncombo;
    res.coarse_theta = best.theta;
    res.coarse_total = best.score;
    return res;
}

// Monte-Carlo estimate of TissueOverlap for a box: fractions from uniform
// samples inside the box (classified by containing voxel, ignoring samples
// outside the field of view); fSolid_outside from uniform samples over solid
// voxels with within-voxel jitter. The skull distance is not estimated and
// is reported as +infinity.
inline TissueOverlap monte_carlo_overlap(const OrientedBox& b, const LabelVolume& v,
                                         int64_t n, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("monte_carlo_overlap needs n >= 1");
    const GridGeometry& g = v.grid();
    const uint8_t* L = v.labels().data();
    const Mat3 rot = b.rotation();
    const Vec3 h = b.lengths * 0.5;
    std::mt19937_64 rng(seed);

    int64_t counts[kNumLabels] = {0, 0, 0, 0, 0};
    int64_t in_fov = 0;
    for (int64_t s = 0; s < n; ++s) {
        const Vec3 q{(2 * detail::u01(rng) - 1) * h.x, (2 * detail::u01(rng) - 1) * h.y,
                     (2 * detail::u01(rng) - 1) * h.z};
        const Vec3 p = b.center + rot.apply(q);
        const auto idx = g.nearest_index(p);
        if (!g.in_bounds(idx[0], idx[1], idx[2])) continue;
        ++in_fov;
        ++counts[L[g.index(idx[0], idx[1], idx[2])]];
    }

    TissueOverlap ov;
    if (in_fov > 0) {
        ov.fvoi_solid = double(counts[int(Label::SolidTumor)]) / double(in_fov);
        ov.fvoi_periphery = double(counts[int(Label::Periphery)]) / double(in_fov);
        ov.fvoi_necrosis = double(counts[int(Label::Necrosis)]) / double(in_fov);
        ov.fvoi_normal = double(counts[int(Label::NormalBrain)]) / double(in_fov);
    }
    const double box_ml = b.volume_ml();
    ov.solid_in_voi_ml = box_ml * double(counts[int(Label::SolidTumor)]) / double(n);
    ov.vvoi_necrosis_ml = box_ml * double(counts[int(Label::Necrosis)]) / double(n);

    // Complementary estimate over the solid voxel population.
    std::vector<size_t> solid;
    for (size_t f = 0; f < v.labels().size(); ++f)
        if (L[f] == uint8_t(Label::SolidTumor)) solid.push_back(f);
    if (!solid.empty()) {
        int64_t outside = 0;
        const size_t nx = size_t(g.dims[0]), ny = size_t(g.dims[1]);
        for (int64_t s = 0; s < n; ++s) {
            const size_t f = solid[size_t(rng() % solid.size())];
            const int i = int(f % nx);
            const int j = int((f / nx) % ny);
            const int k = int(f / (nx * ny));
            Vec3 p = g.world(i, j, k);
            p.x += (detail::u01(rng) - 0.5) * g.spacing.x;
            p.y += (detail::u01(rng) - 0.5) * g.spacing.y;
            p.z += (detail::u01(rng) - 0.5) * g.spacing.z;
            if (!contains_point(b, p)) ++outside;
        }
        ov.fsolid_outside = double(outside) / double(n);
    }
    ov.skull_distance_mm = std::numeric_limits<double>::infinity();
    return ov;
}

}  // namespace voiplace

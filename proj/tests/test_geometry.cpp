// Oriented boxes against label grids: membership, overlap fractions,
// rasterization, and the sampling-scheme invariants.

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "voiplace/geometry.hpp"
#include "voiplace/phantom.hpp"

using namespace voiplace;
using namespace testsupport;
using Catch::Matchers::WithinAbs;

namespace {

// Volume whose solid tumor is exactly the 8 voxels with centers in {0,2}^3
// (their cells tile [-1,3]^3), surrounded by normal brain.
LabelVolume eight_voxel_solid() {
    GridGeometry g = small_grid(21, 2.0);  // centers at even coordinates
    return make_volume(g, [](const Vec3& p) {
        bool sx = p.x == 0 || p.x == 2;
        bool sy = p.y == 0 || p.y == 2;
        bool sz = p.z == 0 || p.z == 2;
        return (sx && sy && sz) ? Label::SolidTumor : Label::NormalBrain;
    });
}

OrientedBox random_box(std::mt19937_64& rng, double center_range, double len_lo,
                       double len_hi, double angle_deg) {
    auto u = [&](double lo, double hi) {
        return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
    };
    OrientedBox b;
    b.center = {u(-center_range, center_range), u(-center_range, center_range),
                u(-center_range, center_range)};
    b.lengths = {u(len_lo, len_hi), u(len_lo, len_hi), u(len_lo, len_hi)};
    b.angles = {deg_to_rad(u(-angle_deg, angle_deg)), deg_to_rad(u(-angle_deg, angle_deg)),
                deg_to_rad(u(-angle_deg, angle_deg))};
    return b;
}

double max_fraction_gap(const TissueOverlap& a, const TissueOverlap& b) {
    return std::max({std::abs(a.fvoi_solid - b.fvoi_solid),
                     std::abs(a.fvoi_periphery - b.fvoi_periphery),
                     std::abs(a.fvoi_necrosis - b.fvoi_necrosis),
                     std::abs(a.fvoi_normal - b.fvoi_normal),
                     std::abs(a.fsolid_outside - b.fsolid_outside)});
}

}  // namespace

TEST_CASE("contains_point: center, boundary epsilon, rotated frame") {
    OrientedBox b;
    b.center = {3, -4, 5};
    b.lengths = {20, 20, 20};
    CHECK(contains_point(b, b.center));

    b.center = {0, 0, 0};
    CHECK(contains_point(b, {10.0, 0, 0}));        // face is inclusive
    CHECK(!contains_point(b, {10.0001, 0, 0}));    // just beyond the face

    OrientedBox r;
    r.lengths = {40, 10, 10};
    r.angles = {deg_to_rad(90), 0, 0};  // long axis rotated onto world y
    CHECK(contains_point(r, {0, 15, 0}));
    CHECK(!contains_point(r, {15, 0, 0}));
}

TEST_CASE("overlap: exact cover of an 8-voxel solid region") {
    LabelVolume v = eight_voxel_solid();
    DistanceMap d = constant_distance(v.grid(), 20.0);
    OrientedBox b;
    b.center = {1, 1, 1};
    b.lengths = {4, 4, 4};

    for (int ss : {1, 2, 4}) {
        TissueOverlap ov = overlap(b, v, d, ss);
        INFO("supersample " << ss);
        CHECK(ov.fvoi_solid == 1.0);
        CHECK(ov.fsolid_outside == 0.0);
        CHECK(ov.fvoi_normal == 0.0);
        CHECK_THAT(ov.solid_in_voi_ml, WithinAbs(8 * 0.008, 1e-12));
        CHECK(ov.skull_distance_mm == 20.0);
    }
}

TEST_CASE("overlap: box inside normal brain misses all solid tumor") {
    LabelVolume v = eight_voxel_solid();
    DistanceMap d = constant_distance(v.grid(), 20.0);
    OrientedBox b;
    b.center = {-11, -11, -11};  // far from the solid corner region
    b.lengths = {10, 10, 10};
    TissueOverlap ov = overlap(b, v, d, 4);
    CHECK(ov.fvoi_normal == 1.0);
    CHECK(ov.fvoi_solid == 0.0);
    CHECK(ov.fvoi_periphery == 0.0);
    CHECK(ov.fvoi_necrosis == 0.0);
    CHECK(ov.fsolid_outside == 1.0);  // all solid tumor is elsewhere
}

TEST_CASE("overlap: zero supersample is rejected, degenerate box is all-zero with infinite D") {
    LabelVolume v = eight_voxel_solid();
    DistanceMap d = constant_distance(v.grid(), 20.0);
    OrientedBox b;
    CHECK_THROWS_AS(overlap(b, v, d, 0), std::invalid_argument);

    b.center = {500, 500, 500};  // entirely outside the field of view
    b.lengths = {10, 10, 10};
    TissueOverlap ov = overlap(b, v, d, 4);
    CHECK(ov.fvoi_solid == 0.0);
    CHECK(ov.fvoi_normal == 0.0);
    CHECK(ov.solid_in_voi_ml == 0.0);
    CHECK(std::isinf(ov.skull_distance_mm));
}

TEST_CASE("overlap: mismatched distance-map grid is an error") {
    LabelVolume v = eight_voxel_solid();
    DistanceMap d = constant_distance(small_grid(9, 2.0), 20.0);
    OrientedBox b;
    CHECK_THROWS_AS(overlap(b, v, d, 4), DataError);
}

TEST_CASE("rasterize: whole field of view, hand-enumerated corner box, parity with overlap") {
    LabelVolume v = eight_voxel_solid();
    const GridGeometry& g = v.grid();

    SECTION("box covering the whole field of view sets every voxel") {
        OrientedBox b;
        b.center = {0, 0, 0};
        b.lengths = {200, 200, 200};
        MaskVolume m = rasterize(b, g);
        for (uint8_t x : m.data) CHECK(x == 1);
    }

    SECTION("4 mm box centered between voxel centers captures exactly 8") {
        // Centers sit at even coordinates; (1,1,1) is a cell corner, so the
        // nearest centers are at odd offsets +-1 from it on each axis.
        OrientedBox b;
        b.center = {1, 1, 1};
        b.lengths = {4, 4, 4};
        MaskVolume m = rasterize(b, g);
        int64_t set = 0;
        for (uint8_t x : m.data) set += x;
        CHECK(set == 8);
        for (double x : {0.0, 2.0})
            for (double y : {0.0, 2.0})
                for (double z : {0.0, 2.0}) {
                    auto idx = g.nearest_index({x, y, z});
                    CHECK(m.data[g.index(idx[0], idx[1], idx[2])] == 1);
                }
    }

    SECTION("mask-derived fractions equal overlap at supersample 1 exactly") {
        std::mt19937_64 rng(7);
        DistanceMap d = constant_distance(g, 20.0);
        for (int rep = 0; rep < 10; ++rep) {
            OrientedBox b = random_box(rng, 12, 5, 25, 45);
            MaskVolume m = rasterize(b, g);
            int64_t counts[kNumLabels] = {0, 0, 0, 0, 0};
            for (size_t i = 0; i < m.data.size(); ++i)
                if (m.data[i]) ++counts[v.code(i)];
            int64_t total = 0;
            for (int64_t c : counts) total += c;
            TissueOverlap ov = overlap(b, v, d, 1);
            REQUIRE(total > 0);
            CHECK(ov.fvoi_solid == double(counts[int(Label::SolidTumor)]) / double(total));
            CHECK(ov.fvoi_normal == double(counts[int(Label::NormalBrain)]) / double(total));
            CHECK(ov.fvoi_necrosis == double(counts[int(Label::Necrosis)]) / double(total));
            CHECK(ov.fvoi_periphery == double(counts[int(Label::Periphery)]) / double(total));
        }
    }
}

TEST_CASE("skull distance is the minimum distance-map value over contained voxel centers") {
    const auto& c = cube_case();
    const GridGeometry& g = c.volume.grid();
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        OrientedBox b = random_box(rng, 20, 12, 30, 30);
        MaskVolume m = rasterize(b, g);
        double dmin = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < m.data.size(); ++i)
            if (m.data[i]) dmin = std::min(dmin, c.distance.mm[i]);
        TissueOverlap ov = overlap(b, c.volume, c.distance, 4);
        CHECK(ov.skull_distance_mm == dmin);
    }
}

TEST_CASE("overlap fractions match a seeded Monte-Carlo oracle within 0.01") {
    const auto& c = cube_case();
    std::mt19937_64 rng(101);
    for (int rep = 0; rep < 3; ++rep) {
        OrientedBox b = random_box(rng, 15, 14, 34, 30);
        TissueOverlap fast = overlap(b, c.volume, c.distance, 4);
        TissueOverlap mc = monte_carlo_overlap(b, c.volume, 1'000'000, 555 + uint64_t(rep));
        INFO("rep " << rep);
        CHECK(max_fraction_gap(fast, mc) < 0.01);
    }
}

TEST_CASE("nesting monotonicity: growing the box can only reduce missed solid tumor") {
    const auto& c = cube_case();
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 8; ++rep) {
        OrientedBox b = random_box(rng, 12, 8, 20, 40);
        double prev = 1.0 + 1e-12;
        for (double scale : {1.0, 1.3, 1.7, 2.2}) {
            OrientedBox bs = b;
            bs.lengths = b.lengths * scale;
            TissueOverlap ov = overlap(bs, c.volume, c.distance, 4);
            CHECK(ov.fsolid_outside <= prev);
            prev = ov.fsolid_outside;
        }
    }
}

TEST_CASE("90-degree grid rotation leaves every fraction bit-identical") {
    // Rotate the label field and the box about the grid z-axis by 90 degrees;
    // voxel centers map onto voxel centers, so the sampled fractions must not
    // change at all.
    GridGeometry g = small_grid(19, 2.0);
    std::mt19937_64 rng(31);
    std::vector<uint8_t> labels(g.voxel_count());
    for (auto& l : labels) l = uint8_t(rng() % kNumLabels);
    LabelVolume v(g, labels);

    const int n = g.dims[0];
    std::vector<uint8_t> rot_labels(g.voxel_count());
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                rot_labels[g.index(i, j, k)] = labels[g.index(j, n - 1 - i, k)];
    LabelVolume vr(g, rot_labels);

    DistanceMap d = constant_distance(g, 20.0);
    for (int rep = 0; rep < 6; ++rep) {
        OrientedBox b = random_box(rng, 9, 6.3, 17.7, 40);
        OrientedBox br = b;
        br.center = {-b.center.y, b.center.x, b.center.z};
        br.angles.x = normalize_angle(b.angles.x + deg_to_rad(90));

        TissueOverlap o1 = overlap(b, v, d, 4);
        TissueOverlap o2 = overlap(br, vr, d, 4);
        CHECK(o1.fvoi_solid == o2.fvoi_solid);
        CHECK(o1.fvoi_periphery == o2.fvoi_periphery);
        CHECK(o1.fvoi_necrosis == o2.fvoi_necrosis);
        CHECK(o1.fvoi_normal == o2.fvoi_normal);
        CHECK(o1.fsolid_outside == o2.fsolid_outside);
    }
}

TEST_CASE("supersample refinement: consecutive levels converge, gap shrinks toward oracle") {
    const auto& c = cube_case();
    std::mt19937_64 rng(47);
    for (int rep = 0; rep < 3; ++rep) {
        OrientedBox b = random_box(rng, 12, 10, 28, 35);
        TissueOverlap mc = monte_carlo_overlap(b, c.volume, 1'000'000, 999 + uint64_t(rep));

        double gap_prev = std::numeric_limits<double>::infinity();
        for (int s : {1, 2, 4, 8}) {
            TissueOverlap os = overlap(b, c.volume, c.distance, s);
            TissueOverlap os2 = overlap(b, c.volume, c.distance, s + 2);
            // Consecutive-level agreement decays like 1/s.
            CHECK(max_fraction_gap(os, os2) <= 0.25 / s);
            // Distance to the Monte-Carlo oracle shrinks (up to MC noise).
            double gap = max_fraction_gap(os, mc);
            CHECK(gap <= gap_prev + 0.003);
            gap_prev = gap;
        }
    }
}

TEST_CASE("volume consistency: sample count times sample volume approximates box volume") {
    // All-solid volume: solid_in_voi_ml is then exactly (samples inside box)
    // times the sample volume, which must reproduce the box volume within 2%.
    GridGeometry g = small_grid(31, 2.0);
    LabelVolume v = make_volume(g, [](const Vec3&) { return Label::SolidTumor; });
    DistanceMap d = constant_distance(g, 20.0);
    std::mt19937_64 rng(59);
    for (int rep = 0; rep < 8; ++rep) {
        OrientedBox b = random_box(rng, 8, 10, 24, 45);
        TissueOverlap ov = overlap(b, v, d, 4);
        CHECK(std::abs(ov.solid_in_voi_ml - b.volume_ml()) / b.volume_ml() < 0.02);
    }
}

TEST_CASE("fraction budget: tissue fractions sum to at most one") {
    const auto& c = cube_case();
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        OrientedBox b = random_box(rng, 40, 10, 40, 60);
        TissueOverlap ov = overlap(b, c.volume, c.distance, 3);
        double sum = ov.fvoi_solid + ov.fvoi_periphery + ov.fvoi_necrosis + ov.fvoi_normal;
        CHECK(sum <= 1.0 + 1e-12);
        CHECK(ov.fvoi_solid >= 0);
        CHECK(ov.fsolid_outside >= 0);
        CHECK(ov.fsolid_outside <= 1.0);
    }
}

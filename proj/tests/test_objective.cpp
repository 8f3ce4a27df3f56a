// The product objective: Gaussian fraction terms, one-sided volume and
// skull-distance penalties, builtin profiles, and profile (de)serialization.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "voiplace/objective.hpp"

using namespace voiplace;
using namespace testsupport;
using Catch::Matchers::WithinAbs;

namespace {

// An overlap that sits exactly on every balanced-profile target.
TissueOverlap on_target(const PreferenceProfile& p) {
    TissueOverlap ov;
    ov.fvoi_solid = p.terms[int(Term::VoiSolid)].mu;
    ov.fsolid_outside = p.terms[int(Term::SolidOutside)].mu;
    ov.fvoi_periphery = p.terms[int(Term::VoiPeriphery)].mu;
    ov.fvoi_necrosis = p.terms[int(Term::VoiNecrosis)].mu;
    ov.fvoi_normal = p.terms[int(Term::VoiNormal)].mu;
    ov.solid_in_voi_ml = p.volume_cap_ml ? *p.volume_cap_ml : 10.0;
    ov.skull_distance_mm = p.skull_threshold_mm;
    return ov;
}

TissueOverlap random_overlap(std::mt19937_64& rng) {
    auto u = [&](double lo, double hi) {
        return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
    };
    TissueOverlap ov;
    ov.fvoi_solid = u(0, 1);
    ov.fvoi_periphery = u(0, 1 - ov.fvoi_solid);
    ov.fvoi_necrosis = u(0, 1 - ov.fvoi_solid - ov.fvoi_periphery);
    ov.fvoi_normal = u(0, 1 - ov.fvoi_solid - ov.fvoi_periphery - ov.fvoi_necrosis);
    ov.fsolid_outside = u(0, 1);
    ov.solid_in_voi_ml = u(0, 40);
    ov.vvoi_necrosis_ml = u(0, 5);
    ov.skull_distance_mm = u(0, 30);
    return ov;
}

}  // namespace

TEST_CASE("gaussian term: frozen reference values") {
    // exp(-0.5 * ((0-1)/0.32)^2) and exp(-0.5 * ((0.62-0)/0.26)^2)
    CHECK_THAT(gaussian_term(0.0, 1.0, 0.32), WithinAbs(0.0075756774442599355, 1e-15));
    CHECK_THAT(gaussian_term(0.62, 0.0, 0.26), WithinAbs(0.058239278342236266, 1e-15));
    CHECK(gaussian_term(0.5, 0.5, 0.1) == 1.0);
    CHECK(gaussian_term(0.3, 0.7, 0.2) == gaussian_term(0.7, 0.3, 0.2));  // symmetric
}

TEST_CASE("objective is exactly one when every factor is on target") {
    OrientedBox b;
    for (const auto& p : builtin_profiles()) {
        TissueOverlap ov = on_target(p);
        ObjectiveBreakdown bd = evaluate(b, ov, p);
        INFO("profile " << p.name);
        CHECK_THAT(bd.total, WithinAbs(1.0, 1e-12));
        CHECK(bd.volume_penalty == 1.0);
        CHECK(bd.skull_penalty == 1.0);
    }
}

TEST_CASE("volume and skull penalties: exp(-excess) beyond the threshold") {
    const PreferenceProfile p = balanced_profile();
    OrientedBox b;

    TissueOverlap ov = on_target(p);
    ov.solid_in_voi_ml = 17.0;  // cap is 15 -> exp(-2)
    ObjectiveBreakdown bd = evaluate(b, ov, p);
    CHECK_THAT(bd.volume_penalty, WithinAbs(std::exp(-2.0), 1e-15));
    CHECK_THAT(bd.total, WithinAbs(std::exp(-2.0), 1e-12));

    ov = on_target(p);
    ov.skull_distance_mm = 3.0;  // threshold is 5 -> exp(-2)
    bd = evaluate(b, ov, p);
    CHECK_THAT(bd.skull_penalty, WithinAbs(std::exp(-2.0), 1e-15));
    CHECK_THAT(bd.skull_penalty, WithinAbs(0.1353352832366127, 1e-15));
}

TEST_CASE("one-sided penalties are the identity on their inactive side") {
    const PreferenceProfile balanced = balanced_profile();
    const PreferenceProfile large = large_voi_profile();
    OrientedBox b;
    std::mt19937_64 rng(20260816);
    for (int rep = 0; rep < 1000; ++rep) {
        TissueOverlap ov = random_overlap(rng);

        ObjectiveBreakdown bd = evaluate(b, ov, balanced);
        if (ov.solid_in_voi_ml <= *balanced.volume_cap_ml) CHECK(bd.volume_penalty == 1.0);
        if (ov.skull_distance_mm >= balanced.skull_threshold_mm) CHECK(bd.skull_penalty == 1.0);
        if (ov.solid_in_voi_ml > *balanced.volume_cap_ml) CHECK(bd.volume_penalty < 1.0);
        if (ov.skull_distance_mm < balanced.skull_threshold_mm) CHECK(bd.skull_penalty < 1.0);

        // large_voi has no cap: the volume penalty never bites.
        CHECK(evaluate(b, ov, large).volume_penalty == 1.0);
    }
}

TEST_CASE("total is the product of all factors") {
    OrientedBox b;
    std::mt19937_64 rng(404);
    for (const auto& p : builtin_profiles()) {
        for (int rep = 0; rep < 1000; ++rep) {
            TissueOverlap ov = random_overlap(rng);
            ObjectiveBreakdown bd = evaluate(b, ov, p);
            double prod = bd.volume_penalty * bd.skull_penalty;
            for (double t : bd.term_scores) prod *= t;
            CHECK_THAT(bd.total, WithinAbs(prod, 1e-12));
            CHECK(bd.total >= 0.0);
            CHECK(bd.total <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("a box with no sample points in the field of view scores zero") {
    const PreferenceProfile p = balanced_profile();
    TissueOverlap ov;  // all-zero fractions
    ov.skull_distance_mm = std::numeric_limits<double>::infinity();
    OrientedBox b;
    ObjectiveBreakdown bd = evaluate(b, ov, p);
    CHECK(bd.skull_penalty == 0.0);
    CHECK(bd.total == 0.0);
}

TEST_CASE("builtin profile constants") {
    const PreferenceProfile b = balanced_profile();
    CHECK(b.name == "balanced");
    CHECK(b.terms[int(Term::VoiSolid)].mu == 1.0);
    CHECK(b.terms[int(Term::VoiSolid)].sigma == 0.32);
    CHECK(b.terms[int(Term::SolidOutside)].mu == 0.0);
    CHECK(b.terms[int(Term::SolidOutside)].sigma == 0.26);
    CHECK(b.terms[int(Term::VoiPeriphery)].sigma == 0.31);
    CHECK(b.terms[int(Term::VoiNecrosis)].sigma == 0.12);
    CHECK(b.terms[int(Term::VoiNormal)].sigma == 0.16);
    REQUIRE(b.volume_cap_ml.has_value());
    CHECK(*b.volume_cap_ml == 15.0);
    CHECK(b.skull_threshold_mm == 5.0);

    const PreferenceProfile l = large_voi_profile();
    CHECK(l.name == "large_voi");
    CHECK(l.terms[int(Term::VoiSolid)].sigma == 0.64);
    CHECK(l.terms[int(Term::SolidOutside)].sigma == 0.13);
    CHECK(l.terms[int(Term::VoiPeriphery)].sigma == 0.62);
    CHECK(l.terms[int(Term::VoiNecrosis)].sigma == 0.24);
    CHECK(l.terms[int(Term::VoiNormal)].sigma == 0.32);
    CHECK(!l.volume_cap_ml.has_value());
    CHECK(l.skull_threshold_mm == 5.0);

    auto all = builtin_profiles();
    REQUIRE(all.size() == 2);
    CHECK(all[0].name == "balanced");
    CHECK(all[1].name == "large_voi");
}

TEST_CASE("profile validation rejects bad parameterizations") {
    PreferenceProfile p = balanced_profile();
    p.terms[0].sigma = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = balanced_profile();
    p.terms[2].mu = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = balanced_profile();
    p.volume_cap_ml = -3.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = balanced_profile();
    p.skull_threshold_mm = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("profiles round-trip through json, with and without a volume cap") {
    for (const auto& p : builtin_profiles()) {
        PreferenceProfile q = profile_from_json(profile_to_json(p));
        CHECK(q.name == p.name);
        for (int t = 0; t < kNumTerms; ++t) {
            CHECK(q.terms[t].mu == p.terms[t].mu);
            CHECK(q.terms[t].sigma == p.terms[t].sigma);
        }
        CHECK(q.volume_cap_ml == p.volume_cap_ml);
        CHECK(q.skull_threshold_mm == p.skull_threshold_mm);
    }
}

TEST_CASE("profile files load and resolve by name") {
    std::string path = temp_path("profiles", ".json");
    {
        nlohmann::json j;
        j["profiles"] = {profile_to_json(balanced_profile()),
                         profile_to_json(large_voi_profile())};
        std::ofstream(path) << j.dump(2);
    }

    auto loaded = load_profiles(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].name == "large_voi");

    SECTION("builtin names resolve without touching the filesystem") {
        CHECK(resolve_profile("balanced").name == "balanced");
        CHECK(resolve_profile("large_voi").name == "large_voi");
    }
    SECTION("file#name picks one profile from a multi-profile file") {
        CHECK(resolve_profile(path + "#large_voi").name == "large_voi");
        CHECK_THROWS_AS(resolve_profile(path + "#absent"), DataError);
    }
    SECTION("a bare multi-profile file is ambiguous") {
        CHECK_THROWS_AS(resolve_profile(path), DataError);
    }
    SECTION("unknown names are rejected") {
        CHECK_THROWS_AS(resolve_profile("no_such_profile"), DataError);
    }
    std::filesystem::remove(path);
}

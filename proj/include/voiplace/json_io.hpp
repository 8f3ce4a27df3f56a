#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "voiplace/metrics.hpp"
#include "voiplace/search.hpp"
#include "voiplace/version.hpp"

namespace voiplace {

using json = nlohmann::json;

// JSON has no infinity; the skull-distance sentinel for boxes without any
// voxel center maps to null and back.
inline json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}
inline double double_or_inf(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline Vec3 vec3_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline constexpr const char* kAngleConvention = "intrinsic-ZYX";

// Placement geometry at the tool boundary: millimeters and degrees, with
// angles listed in application order (Z, then Y, then X).
inline json theta_to_json(const OrientedBox& b) {
    return json{{"center_mm", vec3_to_json(b.center)},
                {"lengths_mm", vec3_to_json(b.lengths)},
                {"angles_deg",
                 json::array({rad_to_deg(b.angles.x), rad_to_deg(b.angles.y),
                              rad_to_deg(b.angles.z)})},
                {"convention", kAngleConvention}};
}

inline OrientedBox theta_from_json(const json& j) {
    try {
        if (j.at("convention").get<std::string>() != kAngleConvention)
            throw DataError("placement uses unsupported angle convention '" +
                            j.at("convention").get<std::string>() + "' (expected " +
                            kAngleConvention + ")");
        OrientedBox b;
        b.center = vec3_from_json(j.at("center_mm"));
        b.lengths = vec3_from_json(j.at("lengths_mm"));
        const auto& a = j.at("angles_deg");
        b.angles = {deg_to_rad(a.at(0).get<double>()), deg_to_rad(a.at(1).get<double>()),
                    deg_to_rad(a.at(2).get<double>())};
        return b;
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid placement json: ") + e.what());
    }
}

inline json grid_to_json(const GridGeometry& g) {
    return json{{"dims", json::array({g.dims[0], g.dims[1], g.dims[2]})},
                {"spacing_mm", vec3_to_json(g.spacing)},
                {"origin_mm", vec3_to_json(g.origin)}};
}

inline GridGeometry grid_from_json(const json& j) {
    GridGeometry g;
    try {
        const auto& d = j.at("dims");
        g.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
        g.spacing = vec3_from_json(j.at("spacing_mm"));
        g.origin = vec3_from_json(j.at("origin_mm"));
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid grid json: ") + e.what());
    }
    g.validate();
    return g;
}

inline json overlap_to_json(const TissueOverlap& ov) {
    return json{{"fvoi_solid", ov.fvoi_solid},
                {"fsolid_outside", ov.fsolid_outside},
                {"fvoi_periphery", ov.fvoi_periphery},
                {"fvoi_necrosis", ov.fvoi_necrosis},
                {"fvoi_normal", ov.fvoi_normal},
                {"solid_in_voi_ml", ov.solid_in_voi_ml},
                {"vvoi_necrosis_ml", ov.vvoi_necrosis_ml},
                {"skull_distance_mm", finite_or_null(ov.skull_distance_mm)}};
}

inline TissueOverlap overlap_from_json(const json& j) {
    TissueOverlap ov;
    ov.fvoi_solid = j.at("fvoi_solid");
    ov.fsolid_outside = j.at("fsolid_outside");
    ov.fvoi_periphery = j.at("fvoi_periphery");
    ov.fvoi_necrosis = j.at("fvoi_necrosis");
    ov.fvoi_normal = j.at("fvoi_normal");
    ov.solid_in_voi_ml = j.at("solid_in_voi_ml");
    ov.vvoi_necrosis_ml = j.at("vvoi_necrosis_ml");
    ov.skull_distance_mm = double_or_inf(j.at("skull_distance_mm"));
    return ov;
}

inline json breakdown_to_json(const ObjectiveBreakdown& bd) {
    json terms;
    for (int t = 0; t < kNumTerms; ++t) terms[kTermNames[t]] = bd.term_scores[size_t(t)];
    return json{{"terms", terms},
                {"volume_penalty", bd.volume_penalty},
                {"skull_penalty", bd.skull_penalty},
                {"total", bd.total}};
}

inline ObjectiveBreakdown breakdown_from_json(const json& j) {
    ObjectiveBreakdown bd;
    for (int t = 0; t < kNumTerms; ++t)
        bd.term_scores[size_t(t)] = j.at("terms").at(kTermNames[t]).get<double>();
    bd.volume_penalty = j.at("volume_penalty");
    bd.skull_penalty = j.at("skull_penalty");
    bd.total = j.at("total");
    return bd;
}

inline json provenance_to_json(const SearchProvenance& p) {
    json j{{"kind", p.kind == SearchProvenance::Kind::Full ? "full" : "conditioned"},
           {"profile", p.profile}};
    if (p.kind == SearchProvenance::Kind::Conditioned) j["center_index"] = p.center_index;
    return j;
}

inline SearchProvenance provenance_from_json(const json& j) {
    SearchProvenance p;
    const std::string kind = j.at("kind");
    if (kind == "full")
        p.kind = SearchProvenance::Kind::Full;
    else if (kind == "conditioned")
        p.kind = SearchProvenance::Kind::Conditioned;
    else
        throw DataError("unknown provenance kind '" + kind + "'");
    p.profile = j.at("profile");
    if (j.contains("center_index")) p.center_index = j.at("center_index");
    return p;
}

inline json placement_to_json(const PlacementResult& r) {
    return json{{"theta", theta_to_json(r.theta)},
                {"objective", breakdown_to_json(r.breakdown)},
                {"overlap", overlap_to_json(r.overlap)},
                {"provenance", provenance_to_json(r.provenance)},
                {"evaluations", r.evaluations},
                {"coarse_theta", theta_to_json(r.coarse_theta)},
                {"coarse_total", r.coarse_total}};
}

inline PlacementResult placement_from_json(const json& j) {
    PlacementResult r;
    r.theta = theta_from_json(j.at("theta"));
    r.breakdown = breakdown_from_json(j.at("objective"));
    r.overlap = overlap_from_json(j.at("overlap"));
    r.provenance = provenance_from_json(j.at("provenance"));
    r.evaluations = j.at("evaluations");
    r.coarse_theta = theta_from_json(j.at("coarse_theta"));
    r.coarse_total = j.at("coarse_total");
    return r;
}

inline json candidate_set_to_json(const CandidateSet& set) {
    json centers = json::array();
    for (const auto& c : set.centers) centers.push_back(vec3_to_json(c));
    json cands = json::array();
    for (const auto& c : set.candidates)
        cands.push_back(json{{"id", c.id}, {"placement", placement_to_json(c.placement)}});
    return json{{"grid", grid_to_json(set.grid)},
                {"centers", centers},
                {"effective_interval_ml", set.effective_interval_ml},
                {"profiles", set.profile_names},
                {"candidates", cands}};
}

inline CandidateSet candidate_set_from_json(const json& j) {
    CandidateSet set;
    try {
        set.grid = grid_from_json(j.at("grid"));
        for (const auto& c : j.at("centers")) set.centers.push_back(vec3_from_json(c));
        set.effective_interval_ml = j.at("effective_interval_ml");
        set.profile_names = j.at("profiles").get<std::vector<std::string>>();
        for (const auto& c : j.at("candidates"))
            set.candidates.push_back(
                {c.at("id").get<std::string>(), placement_from_json(c.at("placement"))});
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid candidate set json: ") + e.what());
    }
    return set;
}

inline json report_to_json(const MetricsReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json totals;
        for (size_t i = 0; i < rep.profile_names.size(); ++i)
            totals[rep.profile_names[i]] = r.objective_totals[i];
        rows.push_back(json{{"id", r.id},
                            {"provenance", r.provenance},
                            {"profile", r.profile},
                            {"theta", theta_to_json(r.theta)},
                            {"fvoi_solid", r.fvoi_solid},
                            {"fsolid_outside", r.fsolid_outside},
                            {"fvoi_periphery", r.fvoi_periphery},
                            {"fvoi_necrosis", r.fvoi_necrosis},
                            {"fvoi_normal", r.fvoi_normal},
                            {"vvoi_necrosis_ml", r.vvoi_necrosis_ml},
                            {"voi_volume_ml", r.voi_volume_ml},
                            {"skull_distance_mm", finite_or_null(r.skull_distance_mm)},
                            {"objective_totals", totals}});
    }
    return json{{"profiles", rep.profile_names}, {"rows", rows}};
}

inline MetricsReport report_from_json(const json& j) {
    MetricsReport rep;
    try {
        rep.profile_names = j.at("profiles").get<std::vector<std::string>>();
        for (const auto& e : j.at("rows")) {
            MetricsRow r;
            r.id = e.at("id").get<std::string>();
            r.provenance = e.at("provenance").get<std::string>();
            r.profile = e.at("profile").get<std::string>();
            r.theta = theta_from_json(e.at("theta"));
            r.fvoi_solid = e.at("fvoi_solid");
            r.fsolid_outside = e.at("fsolid_outside");
            r.fvoi_periphery = e.at("fvoi_periphery");
            r.fvoi_necrosis = e.at("fvoi_necrosis");
            r.fvoi_normal = e.at("fvoi_normal");
            r.vvoi_necrosis_ml = e.at("vvoi_necrosis_ml");
            r.voi_volume_ml = e.at("voi_volume_ml");
            r.skull_distance_mm = double_or_inf(e.at("skull_distance_mm"));
            for (const auto& name : rep.profile_names)
                r.objective_totals.push_back(e.at("objective_totals").at(name).get<double>());
            rep.rows.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid metrics report json: ") + e.what());
    }
    return rep;
}

// Every file the tool writes is wrapped with version, the fully resolved
// configuration, and digests of its inputs, so a result can be audited and
// reproduced. Deliberately no timestamps: identical runs produce identical
// bytes, and wall-clock context belongs in logs.
inline json make_artifact(const std::string& kind, const json& config, const json& inputs,
                          const json& result) {
    return json{{"artifact", kind},
                {"tool", "voiplace"},
                {"version", kVersion},
                {"config", config},
                {"inputs", inputs},
                {"result", result}};
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw DataError("invalid json in " + path + ": " + e.what());
    }
}

}  // namespace voiplace

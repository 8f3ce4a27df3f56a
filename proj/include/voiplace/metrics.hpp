#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voiplace/search.hpp"

namespace voiplace {

// One evaluated candidate: geometry, the measured fractions and volumes, and
// the objective total under every loaded profile (so a selector can compare
// candidates generated by different preferences on one scale).
struct MetricsRow {
    std::string id;
    std::string provenance;  // "full" or "conditioned[i]"
    std::string profile;     // profile that generated the candidate
    OrientedBox theta;
    double fvoi_solid = 0;
    double fsolid_outside = 0;
    double fvoi_periphery = 0;
    double fvoi_necrosis = 0;
    double fvoi_normal = 0;
    double vvoi_necrosis_ml = 0;
    double voi_volume_ml = 0;
    double skull_distance_mm = 0;
    std::vector<double> objective_totals;  // parallel to MetricsReport::profile_names
};

struct MetricsReport {
    std::vector<std::string> profile_names;
    std::vector<MetricsRow> rows;
};

inline MetricsReport evaluate_metrics(const CandidateSet& set, const LabelVolume& v,
                                      const DistanceMap& d,
                                      const std::vector<PreferenceProfile>& profiles,
                                      int supersample = 4, int threads = 0) {
    if (!(set.grid == v.grid()))
        throw DataError("candidates were generated on a different grid than this volume");
    if (!(d.grid == v.grid())) throw DataError("distance map grid does not match volume");
    MetricsReport rep;
    for (const auto& p : profiles) rep.profile_names.push_back(p.name);
    rep.rows.assign(set.candidates.size(), {});
    parallel_for(int64_t(set.candidates.size()), threads, [&](int64_t i) {
        const Candidate& c = set.candidates[size_t(i)];
        MetricsRow row;
        row.id = c.id;
        row.provenance = c.placement.provenance.to_string();
        row.profile = c.placement.provenance.profile;
        row.theta = c.placement.theta;
        const TissueOverlap ov = overlap(c.placement.theta, v, d, supersample);
        row.fvoi_solid = ov.fvoi_solid;
        row.fsolid_outside = ov.fsolid_outside;
        row.fvoi_periphery = ov.fvoi_periphery;
        row.fvoi_necrosis = ov.fvoi_necrosis;
        row.fvoi_normal = ov.fvoi_normal;
        row.vvoi_necrosis_ml = ov.vvoi_necrosis_ml;
        row.voi_volume_ml = c.placement.theta.volume_ml();
        row.skull_distance_mm = ov.skull_distance_mm;
        for (const auto& p : profiles)
            row.objective_totals.push_back(evaluate(c.placement.theta, ov, p).total);
        rep.rows[size_t(i)] = std::move(row);
    });
    return rep;
}

inline double objective_total(const MetricsRow& row, const MetricsReport& rep,
                              const std::string& profile) {
    for (size_t i = 0; i < rep.profile_names.size(); ++i)
        if (rep.profile_names[i] == profile) return row.objective_totals[i];
    throw std::invalid_argument("report has no objective column for profile '" + profile + "'");
}

namespace detail {

// Fixed-precision, locale-independent number for csv cells.
inline std::string csv_number(double x, int decimals) {
    if (!std::isfinite(x)) return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    return buf;
}

}  // namespace detail

// csv layout: one row per candidate; fractions at 4 decimals, geometry and
// volumes at 3 (the csv feeds prompts, the json feeds programs).
inline std::string report_to_csv(const MetricsReport& rep) {
    std::string out =
        "id,provenance,profile,center_x_mm,center_y_mm,center_z_mm,length_x_mm,length_y_mm,"
        "length_z_mm,angle_z_deg,angle_y_deg,angle_x_deg,fvoi_solid,fsolid_outside,"
        "fvoi_periphery,fvoi_necrosis,fvoi_normal,vvoi_necrosis_ml,voi_volume_ml,"
        "skull_distance_mm";
    for (const auto& name : rep.profile_names) out += ",objective_" + name;
    out += "\n";
    for (const auto& r : rep.rows) {
        out += r.id + "," + r.provenance + "," + r.profile;
        for (int i = 0; i < 3; ++i) out += "," + detail::csv_number(r.theta.center[i], 3);
        for (int i = 0; i < 3; ++i) out += "," + detail::csv_number(r.theta.lengths[i], 3);
        for (int i = 0; i < 3; ++i)
            out += "," + detail::csv_number(rad_to_deg(r.theta.angles[i]), 3);
        out += "," + detail::csv_number(r.fvoi_solid, 4);
        out += "," + detail::csv_number(r.fsolid_outside, 4);
        out += "," + detail::csv_number(r.fvoi_periphery, 4);
        out += "," + detail::csv_number(r.fvoi_necrosis, 4);
        out += "," + detail::csv_number(r.fvoi_normal, 4);
        out += "," + detail::csv_number(r.vvoi_necrosis_ml, 3);
        out += "," + detail::csv_number(r.voi_volume_ml, 3);
        out += "," + detail::csv_number(r.skull_distance_mm, 3);
        for (double t : r.objective_totals) out += "," + detail::csv_number(t, 6);
        out += "\n";
    }
    return out;
}

}  // namespace voiplace

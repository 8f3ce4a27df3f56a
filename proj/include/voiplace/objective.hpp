#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voiplace/geometry.hpp"

namespace voiplace {

// The five scored fractions, in reporting order.
enum class Term : int {
    VoiSolid = 0,      // fraction of VOI that is solid tumor
    SolidOutside = 1,  // fraction of solid tumor missed by the VOI
    VoiPeriphery = 2,
    VoiNecrosis = 3,
    VoiNormal = 4,
};
inline constexpr int kNumTerms = 5;
inline constexpr const char* kTermNames[kNumTerms] = {
    "fvoi_solid", "fsolid_outside", "fvoi_periphery", "fvoi_necrosis", "fvoi_normal"};

struct TermTarget {
    double mu = 0;
    double sigma = 1;
};

// A named parameterization of the scoring function: Gaussian targets for the
// five fractions, an optional cap on solid-tumor volume inside the VOI, and
// a minimum skull distance below which placements are penalized.
struct PreferenceProfile {
    std::string name;
    std::array<TermTarget, kNumTerms> terms{};
    std::optional<double> volume_cap_ml;
    double skull_threshold_mm = 5.0;

    void validate() const {
        for (int t = 0; t < kNumTerms; ++t) {
            if (!(terms[t].sigma > 0))
                throw std::invalid_argument("profile '" + name + "': sigma of " + kTermNames[t] +
                                            " must be > 0");
            if (terms[t].mu < 0 || terms[t].mu > 1)
                throw std::invalid_argument("profile '" + name + "': mu of " + kTermNames[t] +
                                            " must be in [0,1]");
        }
        if (volume_cap_ml && !(*volume_cap_ml > 0))
            throw std::invalid_argument("profile '" + name + "': volume cap must be > 0");
        if (skull_threshold_mm < 0)
            throw std::invalid_argument("profile '" + name + "': skull threshold must be >= 0");
    }
};

struct ObjectiveBreakdown {
    std::array<double, kNumTerms> term_scores{};
    double volume_penalty = 1;
    double skull_penalty = 1;
    double total = 0;
};

inline double gaussian_term(double f, double mu, double sigma) {
    const double z = (f - mu) / sigma;
    return std::exp(-0.5 * z * z);
}

// Product objective: five Gaussian fraction terms times two one-sided
// penalties. Penalties are identity on their inactive side (V <= cap,
// D >= threshold) and exp(-excess) beyond it, so every factor is <= 1.
// A non-finite D marks a box with no voxel centers in the field of view;
// such placements are hard-zeroed (skull_penalty = 0).
inline ObjectiveBreakdown evaluate(const OrientedBox& b, const TissueOverlap& ov,
                                   const PreferenceProfile& p) {
    (void)b;  // box geometry is already folded into ov; kept for interface symmetry
    const double f[kNumTerms] = {ov.fvoi_solid, ov.fsolid_outside, ov.fvoi_periphery,
                                 ov.fvoi_necrosis, ov.fvoi_normal};
    ObjectiveBreakdown out;
    double total = 1;
    for (int t = 0; t < kNumTerms; ++t) {
        out.term_scores[t] = gaussian_term(f[t], p.terms[t].mu, p.terms[t].sigma);
        total *= out.term_scores[t];
    }
    if (p.volume_cap_ml)
        out.volume_penalty = std::exp(-std::max(0.0, ov.solid_in_voi_ml - *p.volume_cap_ml));
    total *= out.volume_penalty;
    if (std::isfinite(ov.skull_distance_mm))
        out.skull_penalty =
            std::exp(-std::max(0.0, p.skull_threshold_mm - ov.skull_distance_mm));
    else
        out.skull_penalty = 0;
    total *= out.skull_penalty;
    out.total = total;
    return out;
}

// Measure-and-score in one step; the overlap is returned alongside the
// breakdown since callers almost always want both.
inline std::pair<ObjectiveBreakdown, TissueOverlap> score_placement(
    const OrientedBox& b, const LabelVolume& v, const DistanceMap& d,
    const PreferenceProfile& p, int supersample) {
    const TissueOverlap ov = overlap(b, v, d, supersample);
    return {evaluate(b, ov, p), ov};
}

inline PreferenceProfile balanced_profile() {
    PreferenceProfile p;
    p.name = "balanced";
    p.terms[int(Term::VoiSolid)] = {1.0, 0.32};
    p.terms[int(Term::SolidOutside)] = {0.0, 0.26};
    p.terms[int(Term::VoiPeriphery)] = {0.0, 0.31};
    p.terms[int(Term::VoiNecrosis)] = {0.0, 0.12};
    p.terms[int(Term::VoiNormal)] = {0.0, 0.16};
    p.volume_cap_ml = 15.0;
    p.skull_threshold_mm = 5.0;
    return p;
}

// Same targets as balanced, tolerances doubled except for missed solid
// tumor (halved, so large placements that still miss tumor score poorly),
// and no volume cap.
inline PreferenceProfile large_voi_profile() {
    PreferenceProfile p;
    p.name = "large_voi";
    p.terms[int(Term::VoiSolid)] = {1.0, 0.64};
    p.terms[int(Term::SolidOutside)] = {0.0, 0.13};
    p.terms[int(Term::VoiPeriphery)] = {0.0, 0.62};
    p.terms[int(Term::VoiNecrosis)] = {0.0, 0.24};
    p.terms[int(Term::VoiNormal)] = {0.0, 0.32};
    p.volume_cap_ml.reset();
    p.skull_threshold_mm = 5.0;
    return p;
}

inline std::vector<PreferenceProfile> builtin_profiles() {
    return {balanced_profile(), large_voi_profile()};
}

inline nlohmann::json profile_to_json(const PreferenceProfile& p) {
    nlohmann::json terms;
    for (int t = 0; t < kNumTerms; ++t)
        terms[kTermNames[t]] = {{"mu", p.terms[t].mu}, {"sigma", p.terms[t].sigma}};
    nlohmann::json j{{"name", p.name},
                     {"terms", terms},
                     {"skull_threshold_mm", p.skull_threshold_mm}};
    if (p.volume_cap_ml) j["volume_cap_ml"] = *p.volume_cap_ml;
    return j;
}

inline PreferenceProfile profile_from_json(const nlohmann::json& j) {
    PreferenceProfile p;
    p.name = j.at("name").get<std::string>();
    const auto& terms = j.at("terms");
    for (int t = 0; t < kNumTerms; ++t) {
        const auto& e = terms.at(kTermNames[t]);
        p.terms[t] = {e.at("mu").get<double>(), e.at("sigma").get<double>()};
    }
    if (j.contains("volume_cap_ml") && !j["volume_cap_ml"].is_null())
        p.volume_cap_ml = j["volume_cap_ml"].get<double>();
    p.skull_threshold_mm = j.at("skull_threshold_mm").get<double>();
    p.validate();
    return p;
}

// Profile file: {"profiles": [<profile>, ...]}.
inline std::vector<PreferenceProfile> load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open profile file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid profile file " + path + ": " + e.what());
    }
    std::vector<PreferenceProfile> out;
    try {
        for (const auto& e : j.at("profiles")) out.push_back(profile_from_json(e));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid profile file " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid profile file " + path + ": " + e.what());
    }
    if (out.empty()) throw DataError("profile file " + path + " defines no profiles");
    return out;
}

// Resolves "--profile" arguments: a builtin name, a profile file containing
// exactly one profile, or "<file>#<name>" to pick from a multi-profile file.
inline PreferenceProfile resolve_profile(const std::string& arg) {
    for (const auto& p : builtin_profiles())
        if (p.name == arg) return p;
    std::string path = arg, name;
    if (const auto hash = arg.rfind('#'); hash != std::string::npos) {
        path = arg.substr(0, hash);
        name = arg.substr(hash + 1);
    }
    std::ifstream probe(path);
    if (!probe)
        throw DataError("unknown profile '" + arg + "' (not a builtin name or readable file)");
    probe.close();
    auto all = load_profiles(path);
    if (name.empty()) {
        if (all.size() != 1)
            throw DataError("profile file " + path + " defines " + std::to_string(all.size()) +
                            " profiles; select one with '" + path + "#<name>'");
        return all.front();
    }
    for (const auto& p : all)
        if (p.name == name) return p;
    throw DataError("profile '" + name + "' not found in " + path);
}

}  // namespace voiplace

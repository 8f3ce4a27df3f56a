// voiplace: single entry point for VOI planning — phantom generation, search,
// candidate generation, metrics, the agent workflow, and mask export.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 tool/endpoint error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voiplace/agent.hpp"
#include "voiplace/json_io.hpp"
#include "voiplace/metrics.hpp"
#include "voiplace/nifti_io.hpp"
#include "voiplace/phantom.hpp"
#include "voiplace/sha256.hpp"
#include "voiplace/search.hpp"
#include "voiplace/version.hpp"

using namespace voiplace;

namespace {

// Immediate exit with a specific code from inside a subcommand callback.
struct ExitCode {
    int code;
};

struct VolumeFlags {
    std::string labels = "canonical";
    std::string brain_mask;
    bool standardize = false;
};

void add_volume_flags(CLI::App* cmd, VolumeFlags& vf) {
    cmd->add_option("--labels", vf.labels, "Label encoding of the input volume")
        ->check(CLI::IsMember({"canonical", "brats"}))
        ->capture_default_str();
    cmd->add_option("--brain-mask", vf.brain_mask,
                    "Companion brain-mask volume (nonzero = inside brain)");
    cmd->add_flag("--standardize", vf.standardize,
                  "Resample to the standard 128^3 / 2 mm grid after loading");
}

LoadOptions load_options(const VolumeFlags& vf) {
    LoadOptions opt;
    opt.map = vf.labels == "brats" ? LabelMap::brats() : LabelMap::canonical();
    if (!vf.brain_mask.empty()) opt.brain_mask_path = vf.brain_mask;
    return opt;
}

LabelVolume load_volume(const std::string& path, const VolumeFlags& vf) {
    LabelVolume v = load_label_volume(path, load_options(vf));
    if (vf.standardize) v = standardize(v);
    return v;
}

json volume_flags_json(const VolumeFlags& vf) {
    return json{{"labels", vf.labels},
                {"brain_mask", vf.brain_mask},
                {"standardize", vf.standardize}};
}

// The thread count is deliberately NOT part of the echoed configuration:
// results are thread-count invariant by design (a tested property), so the
// same logical run must produce the same artifact bytes at any --threads.
json search_config_json(const SearchConfig& c) {
    return json{{"len_min_mm", c.len_min_mm},
                {"len_max_mm", c.len_max_mm},
                {"coarse_center_step_mm", c.coarse_center_step_mm},
                {"coarse_lengths_mm", c.coarse_lengths_mm},
                {"coarse_angle_step_deg", c.coarse_angle_step_deg},
                {"coarse_angle_range_deg", c.coarse_angle_range_deg},
                {"angle_seeds_full", c.angle_seeds_full},
                {"angle_seeds_conditioned", c.angle_seeds_conditioned},
                {"refine_passes", c.refine_passes},
                {"shrink", c.shrink},
                {"init_center_step_mm", c.init_center_step_mm},
                {"init_length_step_mm", c.init_length_step_mm},
                {"init_angle_step_deg", c.init_angle_step_deg},
                {"min_center_step_mm", c.min_center_step_mm},
                {"min_length_step_mm", c.min_length_step_mm},
                {"min_angle_step_deg", c.min_angle_step_deg},
                {"coarse_supersample", c.coarse_supersample},
                {"refine_supersample", c.refine_supersample},
                {"seed", c.seed}};
}

json input_entry(const std::string& path) {
    return json{{"path", path}, {"sha256", sha256_file_hex(path)}};
}

// Digest entries for a volume path; the fallback format is two files.
json volume_inputs(const std::string& path) {
    json inputs{{"volume", input_entry(path)}};
    if (has_suffix(path, ".json")) inputs["volume_raw"] = input_entry(raw_sibling_path(path));
    return inputs;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        if (comma > pos) out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

std::vector<PreferenceProfile> resolve_profiles(const std::string& arg) {
    std::vector<PreferenceProfile> out;
    for (const auto& item : split_commas(arg)) out.push_back(resolve_profile(item));
    if (out.empty()) throw std::invalid_argument("no profiles given");
    return out;
}

json profiles_json(const std::vector<PreferenceProfile>& profiles) {
    json arr = json::array();
    for (const auto& p : profiles) arr.push_back(profile_to_json(p));
    return arr;
}

// Accept a bare candidate-set json or a wrapped candidates artifact.
CandidateSet read_candidate_set(const std::string& path) {
    json j = read_json_file(path);
    if (j.contains("artifact")) {
        if (j.at("artifact") != "candidates")
            throw DataError(path + " is a '" + j.at("artifact").get<std::string>() +
                            "' artifact, not a candidate set");
        j = j.at("result");
    }
    return candidate_set_from_json(j);
}

// Accept a bare theta json, any {"theta": ...} object, or a wrapped artifact
// whose result carries a theta (placement or selection).
OrientedBox read_theta(const std::string& path) {
    json j = read_json_file(path);
    for (int depth = 0; depth < 3; ++depth) {
        if (j.contains("center_mm")) return theta_from_json(j);
        if (j.contains("theta")) {
            j = j.at("theta");
            continue;
        }
        if (j.contains("result")) {
            j = j.at("result");
            continue;
        }
        break;
    }
    throw DataError("no placement geometry found in " + path);
}

double mean_of(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / double(xs.size());
}

double sample_sd(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / double(xs.size() - 1));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VOI placement planning for MR spectroscopy in labeled brain-tumor volumes"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // ---- info -------------------------------------------------------------
    auto* info = app.add_subcommand("info", "Print grid geometry and per-class tissue volumes");
    std::string info_vol;
    VolumeFlags info_vf;
    std::string info_out;
    info->add_option("volume", info_vol, "Label volume (.nii or .json+raw)")->required();
    add_volume_flags(info, info_vf);
    info->add_option("-o,--output", info_out, "Also write an info artifact (json)");
    info->callback([&] {
        const LabelVolume v = load_volume(info_vol, info_vf);
        const GridGeometry& g = v.grid();
        std::cout << "dims: " << g.dims[0] << " x " << g.dims[1] << " x " << g.dims[2] << "\n";
        std::cout << "spacing_mm: " << g.spacing.x << " " << g.spacing.y << " " << g.spacing.z
                  << "\n";
        std::cout << "origin_mm: " << g.origin.x << " " << g.origin.y << " " << g.origin.z
                  << "\n";
        json classes;
        for (int c = 0; c < kNumLabels; ++c) {
            const Label l = Label(c);
            classes[label_name(l)] = {{"voxels", v.class_count(l)},
                                      {"volume_ml", tissue_volume_ml(v, l)}};
            std::cout << label_name(l) << ": " << v.class_count(l) << " voxels, "
                      << tissue_volume_ml(v, l) << " mL\n";
        }
        if (!info_out.empty()) {
            const json art = make_artifact(
                "info", json{{"volume", volume_flags_json(info_vf)}}, volume_inputs(info_vol),
                json{{"grid", grid_to_json(g)}, {"classes", classes}});
            write_json_file(info_out, art);
        }
    });

    // ---- phantom ----------------------------------------------------------
    auto* phantom =
        app.add_subcommand("phantom", "Generate a synthetic labeled phantom volume");
    std::string phantom_spec_path;
    bool phantom_cube = false;
    std::string phantom_out;
    phantom->add_option("--spec", phantom_spec_path, "Phantom spec (json)");
    phantom->add_flag("--cube", phantom_cube,
                      "Built-in cube fixture: 24 mm solid box in an 80 mm brain sphere");
    phantom->add_option("-o,--output", phantom_out, "Output volume (.nii or .json+raw)")
        ->required();
    phantom->callback([&] {
        if (phantom_cube == !phantom_spec_path.empty())
            throw std::invalid_argument("phantom needs exactly one of --spec or --cube");
        const PhantomSpec spec = phantom_cube
                                     ? cube_phantom_spec()
                                     : phantom_spec_from_json(read_json_file(phantom_spec_path));
        const LabelVolume v = generate_phantom(spec);
        write_volume(phantom_out, v);
        std::cout << "wrote " << phantom_out << "\n";
        for (int c = 0; c < kNumLabels; ++c)
            std::cout << label_name(Label(c)) << ": " << tissue_volume_ml(v, Label(c))
                      << " mL\n";
    });

    // ---- place ------------------------------------------------------------
    auto* place = app.add_subcommand("place", "Full search for the best VOI placement");
    std::string place_vol, place_profile = "balanced", place_out;
    VolumeFlags place_vf;
    SearchConfig place_cfg;
    place->add_option("volume", place_vol, "Label volume")->required();
    place->add_option("--profile", place_profile, "Profile: builtin name, file, or file#name")
        ->capture_default_str();
    place->add_option("--threads", place_cfg.threads, "Worker threads (0 = all)")
        ->capture_default_str();
    place->add_option("--seed", place_cfg.seed, "Seed recorded in artifacts")
        ->capture_default_str();
    add_volume_flags(place, place_vf);
    place->add_option("-o,--output", place_out, "Write a placement artifact (json)");
    place->callback([&] {
        const LabelVolume v = load_volume(place_vol, place_vf);
        const DistanceMap d = skull_distance_map(v);
        const PreferenceProfile prof = resolve_profile(place_profile);
        const PlacementResult res = search_full(v, d, prof, place_cfg);
        std::cout << json{{"theta", theta_to_json(res.theta)},
                          {"objective", breakdown_to_json(res.breakdown)},
                          {"overlap", overlap_to_json(res.overlap)}}
                         .dump(2)
                  << "\n";
        if (!place_out.empty()) {
            const json config{{"profile", profile_to_json(prof)},
                              {"search", search_config_json(place_cfg)},
                              {"volume", volume_flags_json(place_vf)}};
            write_json_file(place_out, make_artifact("placement", config,
                                                     volume_inputs(place_vol),
                                                     placement_to_json(res)));
        }
    });

    // ---- candidates ---------------------------------------------------------
    auto* cands = app.add_subcommand(
        "candidates", "Generate the reference plus position-conditioned VOI candidates");
    std::string cands_vol, cands_profiles = "balanced,large_voi", cands_out;
    double cands_interval = 0.5;
    int cands_cap = 50;
    VolumeFlags cands_vf;
    SearchConfig cands_cfg;
    cands->add_option("volume", cands_vol, "Label volume")->required();
    cands->add_option("--profiles", cands_profiles, "Comma-separated profile specs")
        ->capture_default_str();
    cands->add_option("--interval", cands_interval, "Center sampling interval (mL)")
        ->capture_default_str();
    cands->add_option("--cap", cands_cap, "Maximum number of sampled centers")
        ->capture_default_str();
    cands->add_option("--threads", cands_cfg.threads, "Worker threads (0 = all)")
        ->capture_default_str();
    cands->add_option("--seed", cands_cfg.seed, "Seed recorded in artifacts")
        ->capture_default_str();
    add_volume_flags(cands, cands_vf);
    cands->add_option("-o,--output", cands_out, "Candidates artifact (json)")->required();
    cands->callback([&] {
        const LabelVolume v = load_volume(cands_vol, cands_vf);
        const DistanceMap d = skull_distance_map(v);
        const auto profiles = resolve_profiles(cands_profiles);
        const CandidateSet set =
            generate_candidates(v, d, profiles, cands_cfg, cands_interval, cands_cap);
        const json config{{"profiles", profiles_json(profiles)},
                          {"interval_ml", cands_interval},
                          {"cap", cands_cap},
                          {"search", search_config_json(cands_cfg)},
                          {"volume", volume_flags_json(cands_vf)}};
        write_json_file(cands_out, make_artifact("candidates", config, volume_inputs(cands_vol),
                                                 candidate_set_to_json(set)));
        std::cout << set.candidates.size() << " candidates from " << set.centers.size()
                  << " centers (effective interval " << set.effective_interval_ml << " mL)\n";
    });

    // ---- metrics ------------------------------------------------------------
    auto* metrics =
        app.add_subcommand("metrics", "Evaluate the per-candidate metrics table");
    std::string metrics_vol, metrics_cands, metrics_profiles = "balanced,large_voi", metrics_out;
    int metrics_ss = 4, metrics_threads = 0;
    VolumeFlags metrics_vf;
    metrics->add_option("volume", metrics_vol, "Label volume")->required();
    metrics->add_option("candidates", metrics_cands, "Candidates artifact (json)")->required();
    metrics->add_option("--profiles", metrics_profiles, "Comma-separated profile specs")
        ->capture_default_str();
    metrics->add_option("--profile", metrics_profiles,
                        "Single profile spec (shorthand for --profiles with one entry)");
    metrics->add_option("--supersample", metrics_ss, "Samples per voxel axis")
        ->capture_default_str();
    metrics->add_option("--threads", metrics_threads, "Worker threads (0 = all)")
        ->capture_default_str();
    add_volume_flags(metrics, metrics_vf);
    metrics->add_option("-o,--output", metrics_out, "Report file (.json or .csv)");
    metrics->callback([&] {
        const LabelVolume v = load_volume(metrics_vol, metrics_vf);
        const DistanceMap d = skull_distance_map(v);
        const CandidateSet set = read_candidate_set(metrics_cands);
        const auto profiles = resolve_profiles(metrics_profiles);
        const MetricsReport rep =
            evaluate_metrics(set, v, d, profiles, metrics_ss, metrics_threads);
        if (metrics_out.empty()) {
            std::cout << report_to_csv(rep);
        } else if (has_suffix(metrics_out, ".csv")) {
            write_text_file(metrics_out, report_to_csv(rep));
        } else {
            json inputs = volume_inputs(metrics_vol);
            inputs["candidates"] = input_entry(metrics_cands);
            const json config{{"profiles", profiles_json(profiles)},
                              {"supersample", metrics_ss},
                              {"volume", volume_flags_json(metrics_vf)}};
            write_json_file(metrics_out,
                            make_artifact("metrics", config, inputs, report_to_json(rep)));
        }
    });

    // ---- agent ----------------------------------------------------------------
    auto* agent = app.add_subcommand(
        "agent", "Run the tool-orchestrating workflow and select the final VOI");
    std::string agent_vol, agent_instruction, agent_selector = "rule";
    std::string agent_profiles = "balanced,large_voi", agent_out, agent_transcript;
    int agent_max_iters = 10, agent_ss = 4, agent_retries = 3;
    double agent_interval = 0.5;
    int agent_cap = 50;
    bool agent_llm_fallback = false;
    VolumeFlags agent_vf;
    SearchConfig agent_search;
    LlmConfig agent_llm = llm_config_from_env();
    agent->add_option("volume", agent_vol, "Label volume")->required();
    agent->add_option("--instruction", agent_instruction, "Natural-language placement preference")
        ->required();
    agent->add_option("--selector", agent_selector, "Final selection method")
        ->check(CLI::IsMember({"rule", "llm"}))
        ->capture_default_str();
    agent->add_option("--max-iters", agent_max_iters, "Workflow iteration cap")
        ->capture_default_str();
    agent->add_option("--profiles", agent_profiles, "Comma-separated profile specs")
        ->capture_default_str();
    agent->add_option("--interval", agent_interval, "Center sampling interval (mL)")
        ->capture_default_str();
    agent->add_option("--cap", agent_cap, "Maximum number of sampled centers")
        ->capture_default_str();
    agent->add_option("--supersample", agent_ss, "Metrics samples per voxel axis")
        ->capture_default_str();
    agent->add_option("--threads", agent_search.threads, "Worker threads (0 = all)")
        ->capture_default_str();
    agent->add_option("--seed", agent_search.seed, "Seed recorded in artifacts")
        ->capture_default_str();
    agent->add_option("--llm-url", agent_llm.base_url, "Chat-completions base URL")
        ->envname("VOIPLACE_LLM_URL");
    agent->add_option("--llm-model", agent_llm.model, "Model id sent to the endpoint")
        ->envname("VOIPLACE_LLM_MODEL");
    agent->add_option("--llm-key", agent_llm.api_key, "Bearer token")
        ->envname("VOIPLACE_LLM_KEY");
    agent->add_option("--llm-retries", agent_retries,
                      "Selection attempts before the rule fallback")
        ->capture_default_str();
    agent->add_flag("--llm-fallback", agent_llm_fallback,
                    "Fall back to the rule selector when the endpoint is unreachable");
    add_volume_flags(agent, agent_vf);
    agent->add_option("-o,--output", agent_out, "Selection artifact (json)");
    agent->add_option("--transcript", agent_transcript, "Transcript artifact (json)");
    agent->callback([&] {
        AgentConfig cfg;
        cfg.selector = agent_selector;
        cfg.max_iterations = agent_max_iters;
        cfg.standardize = agent_vf.standardize;
        cfg.load = load_options(agent_vf);
        cfg.search = agent_search;
        cfg.center_interval_ml = agent_interval;
        cfg.max_candidates = agent_cap;
        cfg.profiles = resolve_profiles(agent_profiles);
        cfg.metrics_supersample = agent_ss;
        cfg.select.llm = agent_llm;
        cfg.select.max_attempts = agent_retries;
        cfg.select.fallback_on_endpoint_error = agent_llm_fallback;

        const UserPreference pref = parse_preference(agent_instruction);
        if (pref.unmatched_warning)
            std::cerr << "warning: no preference keyword matched; assuming Balanced\n";

        json config{{"instruction", agent_instruction},
                    {"preference", preference_kind_name(pref.kind)},
                    {"preference_warning", pref.unmatched_warning},
                    {"selector", agent_selector},
                    {"max_iterations", agent_max_iters},
                    {"interval_ml", agent_interval},
                    {"cap", agent_cap},
                    {"supersample", agent_ss},
                    {"profiles", profiles_json(cfg.profiles)},
                    {"search", search_config_json(cfg.search)},
                    {"volume", volume_flags_json(agent_vf)}};
        if (agent_selector == "llm")
            config["llm"] = {{"url", agent_llm.base_url},
                             {"model", agent_llm.model},
                             {"retries", agent_retries},
                             {"fallback_on_endpoint_error", agent_llm_fallback}};
        const json inputs = volume_inputs(agent_vol);

        auto write_transcript = [&](const AgentTranscript& tr) {
            if (!agent_transcript.empty())
                write_json_file(agent_transcript,
                                make_artifact("transcript", config, inputs,
                                              transcript_to_json(tr)));
        };

        WorkflowResult res;
        try {
            res = run_workflow(agent_instruction, agent_vol, cfg);
        } catch (const WorkflowError& e) {
            write_transcript(e.transcript);
            std::cerr << "agent error: " << e.what() << "\n";
            throw ExitCode{e.endpoint_failure ? 3 : 2};
        }
        write_transcript(res.transcript);
        if (!agent_out.empty())
            write_json_file(agent_out, make_artifact("selection", config, inputs,
                                                     selection_to_json(res.selection)));
        std::cout << "selected " << res.selection.id << " via " << res.selection.selector
                  << " in " << res.transcript.iterations << " iterations\n";
        if (agent_out.empty()) std::cout << selection_to_json(res.selection).dump(2) << "\n";
    });

    // ---- export-mask -----------------------------------------------------------
    auto* mask = app.add_subcommand("export-mask",
                                    "Rasterize a placement onto a volume's grid as a 0/1 mask");
    std::string mask_vol, mask_theta, mask_out;
    VolumeFlags mask_vf;
    mask->add_option("volume", mask_vol, "Label volume defining the grid")->required();
    mask->add_option("theta", mask_theta, "Placement json (bare theta or any artifact with one)")
        ->required();
    mask->add_option("output", mask_out, "Output mask volume (.nii or .json+raw)")->required();
    add_volume_flags(mask, mask_vf);
    mask->callback([&] {
        const LabelVolume v = load_volume(mask_vol, mask_vf);
        const OrientedBox b = read_theta(mask_theta);
        const MaskVolume m = rasterize(b, v.grid());
        write_volume(mask_out, m.grid, m.data);
        size_t inside = 0;
        for (uint8_t x : m.data) inside += x;
        std::cout << "wrote " << mask_out << ": " << inside << " voxels ("
                  << double(inside) * v.grid().voxel_volume_ml() << " mL)\n";
    });

    // ---- bench ------------------------------------------------------------------
    auto* bench = app.add_subcommand(
        "bench", "Run full search across a seeded phantom suite and aggregate metrics");
    std::string bench_suite = "default", bench_profiles = "balanced,large_voi", bench_out;
    int bench_cases = 0, bench_threads = 0;
    bench->add_option("--suite", bench_suite, "Phantom suite")
        ->check(CLI::IsMember({"default", "box"}))
        ->capture_default_str();
    bench->add_option("--cases", bench_cases, "Number of cases (0 = suite default)")
        ->capture_default_str();
    bench->add_option("--profiles", bench_profiles, "Comma-separated profile specs")
        ->capture_default_str();
    bench->add_option("--threads", bench_threads, "Worker threads (0 = all)")
        ->capture_default_str();
    bench->add_option("-o,--output", bench_out, "Stats csv (stdout when omitted)");
    bench->callback([&] {
        const auto profiles = resolve_profiles(bench_profiles);
        const std::vector<PhantomSpec> suite =
            bench_suite == "box" ? box_suite(bench_cases > 0 ? bench_cases : 10)
                                 : default_suite(bench_cases > 0 ? bench_cases : 20);

        // metric name -> per-profile list of per-case values
        const std::vector<std::string> metric_names = {
            "objective_total", "fvoi_solid",  "fsolid_outside",    "fvoi_periphery",
            "fvoi_necrosis",   "fvoi_normal", "voi_volume_ml",     "skull_distance_mm"};
        std::vector<std::vector<std::vector<double>>> values(
            profiles.size(), std::vector<std::vector<double>>(metric_names.size()));

        for (size_t ci = 0; ci < suite.size(); ++ci) {
            const LabelVolume v = generate_phantom(suite[ci]);
            const DistanceMap d = skull_distance_map(v);
            for (size_t pi = 0; pi < profiles.size(); ++pi) {
                SearchConfig cfg;
                cfg.threads = bench_threads;
                const PlacementResult res = search_full(v, d, profiles[pi], cfg);
                const double vals[] = {res.breakdown.total,        res.overlap.fvoi_solid,
                                       res.overlap.fsolid_outside, res.overlap.fvoi_periphery,
                                       res.overlap.fvoi_necrosis,  res.overlap.fvoi_normal,
                                       res.theta.volume_ml(),      res.overlap.skull_distance_mm};
                for (size_t mi = 0; mi < metric_names.size(); ++mi)
                    values[pi][mi].push_back(vals[mi]);
            }
            std::cerr << "case " << (ci + 1) << "/" << suite.size() << " done\n";
        }

        std::string csv = "profile,metric,mean,sd,cases\n";
        for (size_t pi = 0; pi < profiles.size(); ++pi)
            for (size_t mi = 0; mi < metric_names.size(); ++mi) {
                const auto& xs = values[pi][mi];
                csv += profiles[pi].name + "," + metric_names[mi] + "," +
                       detail::csv_number(mean_of(xs), 6) + "," +
                       detail::csv_number(sample_sd(xs), 6) + "," + std::to_string(xs.size()) +
                       "\n";
            }
        if (bench_out.empty())
            std::cout << csv;
        else
            write_text_file(bench_out, csv);
    });

    // ---- dispatch ------------------------------------------------------------
    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return 1;
    } catch (const ExitCode& e) {
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const EndpointError& e) {
        std::cerr << "endpoint error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "voiplace/json_io.hpp"
#include "voiplace/llm_client.hpp"
#include "voiplace/metrics.hpp"
#include "voiplace/nifti_io.hpp"
#include "voiplace/prompt_data.hpp"
#include "voiplace/search.hpp"

namespace voiplace {

// ---------------------------------------------------------------------------
// Preference parsing
// ---------------------------------------------------------------------------

enum class PreferenceKind {
    MaximizeSolidCoverage,  // fvoi_solid, higher is better
    MinimizeSolidOutside,   // fsolid_outside, lower is better
    MinimizeNecrosis,       // vvoi_necrosis_ml, lower is better
    Balanced,               // balanced objective total, higher is better
};

inline const char* preference_kind_name(PreferenceKind k) {
    switch (k) {
        case PreferenceKind::MaximizeSolidCoverage: return "MaximizeSolidCoverage";
        case PreferenceKind::MinimizeSolidOutside: return "MinimizeSolidOutside";
        case PreferenceKind::MinimizeNecrosis: return "MinimizeNecrosis";
        case PreferenceKind::Balanced: return "Balanced";
    }
    return "Balanced";
}

struct UserPreference {
    PreferenceKind kind = PreferenceKind::Balanced;
    std::string raw_text;            // preserved verbatim for the LLM path
    bool unmatched_warning = false;  // no keyword matched; Balanced was assumed
};

// Keyword table, checked in this order on the lowercased instruction; the
// first hit wins:
//   "necro"                      -> MinimizeNecrosis   (necrosis, necrotic)
//   "cover" | "include as much"  -> MaximizeSolidCoverage
//   "miss" | "outside"           -> MinimizeSolidOutside
// Anything else maps to Balanced with a warning flag so the caller can tell
// the user the instruction was not understood as a specific preference.
inline UserPreference parse_preference(const std::string& instruction) {
    std::string lower(instruction);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    const bool blank = lower.find_first_not_of(" \t\r\n") == std::string::npos;
    if (blank) throw std::invalid_argument("instruction must be non-empty");

    UserPreference pref;
    pref.raw_text = instruction;
    auto has = [&](const char* kw) { return lower.find(kw) != std::string::npos; };
    if (has("necro"))
        pref.kind = PreferenceKind::MinimizeNecrosis;
    else if (has("cover") || has("include as much"))
        pref.kind = PreferenceKind::MaximizeSolidCoverage;
    else if (has("miss") || has("outside"))
        pref.kind = PreferenceKind::MinimizeSolidOutside;
    else {
        pref.kind = PreferenceKind::Balanced;
        pref.unmatched_warning = true;
    }
    return pref;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct SelectionResult {
    std::string id;
    OrientedBox theta;
    MetricsRow row;
    std::vector<std::string> profile_names;  // keys for row.objective_totals
    std::string selector;  // "rule" | "llm (<url>, <model>)" | "rule (llm fallback)"
};

struct ToolCall {
    std::string tool;  // "segment" | "place" | "evaluate" | "complete"
    json arguments;
    json result;        // payload when the call succeeded
    std::string error;  // non-empty when the call failed
};

struct AgentTranscript {
    std::vector<ToolCall> tool_calls;
    std::vector<ChatMessage> exchanges;  // prompts sent, replies received, controller notes
    std::string selector;
    std::string final_candidate_id;
    OrientedBox final_theta;
    std::string justification;
    int iterations = 0;
};

// Workflow failure that still carries everything observed up to the failure,
// so the caller can persist the transcript for diagnosis.
class WorkflowError : public DataError {
  public:
    WorkflowError(const std::string& msg, AgentTranscript t, bool endpoint = false)
        : DataError(msg), transcript(std::move(t)), endpoint_failure(endpoint) {}
    AgentTranscript transcript;
    bool endpoint_failure = false;
};

namespace detail {

inline double balanced_total(const MetricsRow& row, const MetricsReport& rep) {
    for (size_t i = 0; i < rep.profile_names.size(); ++i)
        if (rep.profile_names[i] == "balanced") return row.objective_totals[i];
    return 0.0;  // tie-break degrades to lexicographic theta when absent
}

// Primary metric value under the convention "smaller is better" (maximized
// metrics are negated), so one comparator serves every preference.
inline double primary_key(const MetricsRow& row, const MetricsReport& rep, PreferenceKind k) {
    switch (k) {
        case PreferenceKind::MaximizeSolidCoverage: return -row.fvoi_solid;
        case PreferenceKind::MinimizeSolidOutside: return row.fsolid_outside;
        case PreferenceKind::MinimizeNecrosis: return row.vvoi_necrosis_ml;
        case PreferenceKind::Balanced: return -balanced_total(row, rep);
    }
    return 0.0;
}

}  // namespace detail

// Deterministic selector: rank by the preference's primary metric in its
// preferred direction; break ties by balanced objective total (higher wins),
// then lexicographic theta. Balanced ranks by the balanced total directly.
inline SelectionResult rule_based_select(const MetricsReport& rep, const UserPreference& pref) {
    if (rep.rows.empty()) throw std::invalid_argument("metrics report has no candidates");
    const MetricsRow* best = &rep.rows[0];
    for (const auto& row : rep.rows) {
        const double a = detail::primary_key(row, rep, pref.kind);
        const double b = detail::primary_key(*best, rep, pref.kind);
        if (a < b) {
            best = &row;
        } else if (a == b && &row != best) {
            const double ta = detail::balanced_total(row, rep);
            const double tb = detail::balanced_total(*best, rep);
            if (ta > tb || (ta == tb && row.theta.lex_less(best->theta))) best = &row;
        }
    }
    SelectionResult sel;
    sel.id = best->id;
    sel.theta = best->theta;
    sel.row = *best;
    sel.profile_names = rep.profile_names;
    sel.selector = "rule";
    return sel;
}

namespace detail {

// First fenced code block (``` ... ```); the text after the opening fence up
// to the end of its line (a language tag) is discarded.
inline std::optional<std::string> fenced_block(const std::string& text) {
    const size_t open = text.find("```");
    if (open == std::string::npos) return std::nullopt;
    size_t start = text.find('\n', open + 3);
    if (start == std::string::npos) return std::nullopt;
    ++start;
    const size_t close = text.find("```", start);
    if (close == std::string::npos) return std::nullopt;
    return text.substr(start, close - start);
}

inline std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Value of `key: <value>` on its own line inside the block, if present.
inline std::optional<std::string> block_field(const std::string& block, const std::string& key) {
    size_t pos = 0;
    while (pos <= block.size()) {
        size_t eol = block.find('\n', pos);
        if (eol == std::string::npos) eol = block.size();
        const std::string line = trim(block.substr(pos, eol - pos));
        if (line.rfind(key + ":", 0) == 0) return trim(line.substr(key.size() + 1));
        pos = eol + 1;
    }
    return std::nullopt;
}

struct ParsedSelection {
    std::string id;
    std::string reason;
};

// Reply grammar for selection: a fenced block containing `candidate: <id>`
// and `reason: <text>`. Grammar-based on purpose — no fuzzy matching.
inline std::optional<ParsedSelection> parse_selection_reply(const std::string& reply,
                                                            std::string& why_not) {
    const auto block = fenced_block(reply);
    if (!block) {
        why_not = "the reply has no fenced code block";
        return std::nullopt;
    }
    const auto id = block_field(*block, "candidate");
    if (!id || id->empty()) {
        why_not = "the fenced block has no `candidate: <id>` line";
        return std::nullopt;
    }
    const auto reason = block_field(*block, "reason");
    if (!reason || reason->empty()) {
        why_not = "the fenced block has no `reason: <text>` line";
        return std::nullopt;
    }
    return ParsedSelection{*id, *reason};
}

inline std::string id_list(const MetricsReport& rep) {
    std::string ids;
    for (const auto& row : rep.rows) {
        if (!ids.empty()) ids += ", ";
        ids += row.id;
    }
    return ids;
}

inline const MetricsRow* find_row(const MetricsReport& rep, const std::string& id) {
    for (const auto& row : rep.rows)
        if (row.id == id) return &row;
    return nullptr;
}

}  // namespace detail

struct SelectConfig {
    LlmConfig llm;
    int max_attempts = 3;  // total round trips before falling back to the rule selector
    bool fallback_on_endpoint_error = false;  // by default network failure is an error
    std::string prompt_template = prompts::kSelectPromptV1;
};

// Ask the language model to pick a candidate from the metrics table. Invalid
// or out-of-range replies get an error-explaining follow-up and another
// attempt; after max_attempts failures the rule selector decides instead and
// the provenance records that. Endpoint (network) failure is a hard error
// unless fallback_on_endpoint_error is set.
inline SelectionResult llm_select(const MetricsReport& rep, const UserPreference& pref,
                                  LlmClient& client, const SelectConfig& cfg,
                                  AgentTranscript* transcript = nullptr) {
    if (rep.rows.empty()) throw std::invalid_argument("metrics report has no candidates");
    auto note = [&](const std::string& role, const std::string& content) {
        if (transcript) transcript->exchanges.push_back({role, content});
    };

    std::vector<ChatMessage> messages;
    messages.push_back({"system", cfg.prompt_template});
    messages.push_back({"user", "Instruction: " + pref.raw_text +
                                    "\n\nCandidate metrics (csv):\n" + report_to_csv(rep)});
    note("system", messages[0].content);
    note("user", messages[1].content);

    auto fall_back = [&](const std::string& why) {
        note("controller", "falling back to the rule selector: " + why);
        SelectionResult sel = rule_based_select(rep, pref);
        sel.selector = "rule (llm fallback)";
        if (transcript) {
            transcript->selector = sel.selector;
            transcript->justification =
                "rule selector fallback after LLM selection failed (" + why + ")";
        }
        return sel;
    };

    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        std::string reply;
        try {
            reply = client.complete(messages);
        } catch (const EndpointError& e) {
            note("controller", std::string("endpoint error: ") + e.what());
            if (cfg.fallback_on_endpoint_error) return fall_back(e.what());
            throw;
        }
        messages.push_back({"assistant", reply});
        note("assistant", reply);

        std::string why_not;
        const auto parsed = detail::parse_selection_reply(reply, why_not);
        if (parsed) {
            if (const MetricsRow* row = detail::find_row(rep, parsed->id)) {
                SelectionResult sel;
                sel.id = row->id;
                sel.theta = row->theta;
                sel.row = *row;
                sel.profile_names = rep.profile_names;
                sel.selector = "llm (" + cfg.llm.base_url + ", " + cfg.llm.model + ")";
                if (transcript) {
                    transcript->selector = sel.selector;
                    transcript->justification = parsed->reason;
                }
                return sel;
            }
            why_not = "candidate id '" + parsed->id + "' is not in the table";
        }
        if (attempt < cfg.max_attempts) {
            const std::string follow_up =
                "That reply was not accepted: " + why_not +
                ". Valid candidate ids: " + detail::id_list(rep) +
                ". Reply again with exactly one fenced code block containing "
                "`candidate: <id>` and `reason: <one sentence>`.";
            messages.push_back({"user", follow_up});
            note("user", follow_up);
        } else {
            return fall_back(why_not + " (attempt " + std::to_string(attempt) + " of " +
                             std::to_string(cfg.max_attempts) + ")");
        }
    }
    return fall_back("no attempts configured");  // max_attempts < 1
}

// ---------------------------------------------------------------------------
// Workflow controller
// ---------------------------------------------------------------------------

struct AgentConfig {
    std::string selector = "rule";  // "rule" | "llm"
    int max_iterations = 10;
    bool standardize = false;  // resample the ingested volume to the standard grid
    LoadOptions load;
    SearchConfig search;
    double center_interval_ml = 0.5;
    int max_candidates = 50;
    std::vector<PreferenceProfile> profiles;  // empty -> builtin profiles
    int metrics_supersample = 4;
    SelectConfig select;
    std::string workflow_prompt = prompts::kWorkflowPromptV1;
};

struct WorkflowResult {
    SelectionResult selection;
    AgentTranscript transcript;
    CandidateSet candidates;
    MetricsReport report;
};

namespace detail {

// Reply grammar for tool proposals: a fenced block containing
// `tool: <segment|place|evaluate|complete>`.
inline std::optional<std::string> parse_tool_reply(const std::string& reply,
                                                   std::string& why_not) {
    const auto block = fenced_block(reply);
    if (!block) {
        why_not = "the reply has no fenced code block";
        return std::nullopt;
    }
    const auto tool = block_field(*block, "tool");
    if (!tool || tool->empty()) {
        why_not = "the fenced block has no `tool: <name>` line";
        return std::nullopt;
    }
    return *tool;
}

}  // namespace detail

// Drive segment -> place -> evaluate -> complete over a volume file. With the
// rule selector the controller runs the four tools in order itself; with the
// llm selector the model proposes the next tool each turn and the controller
// validates the transition, rejecting illegal ones with an explanation that
// goes back to the model (and into the transcript). Each proposal turn counts
// against max_iterations. The controller owns all tool parameters; the model
// only chooses which registered tool runs next.
inline WorkflowResult run_workflow(const std::string& instruction, const std::string& volume_path,
                                   const AgentConfig& cfg, LlmClient* client = nullptr) {
    const UserPreference pref = parse_preference(instruction);
    const std::vector<PreferenceProfile> profiles =
        cfg.profiles.empty() ? builtin_profiles() : cfg.profiles;
    const bool llm_driven = cfg.selector == "llm";
    if (cfg.selector != "rule" && cfg.selector != "llm")
        throw std::invalid_argument("selector must be 'rule' or 'llm'");

    std::optional<HttpLlmClient> owned_client;
    if (llm_driven && !client) {
        owned_client.emplace(cfg.select.llm);
        client = &*owned_client;
    }

    WorkflowResult out;
    AgentTranscript& tr = out.transcript;
    tr.selector = cfg.selector;

    std::optional<LabelVolume> vol;
    std::optional<DistanceMap> dist;
    bool have_candidates = false;
    bool have_report = false;

    // Tool executors. Exceptions propagate as WorkflowError with the
    // transcript attached (after the failing call is recorded).
    auto run_tool = [&](const std::string& tool) -> json {
        ToolCall call;
        call.tool = tool;
        try {
            if (tool == "segment") {
                call.arguments = {{"path", volume_path}, {"standardize", cfg.standardize}};
                LabelVolume v = load_label_volume(volume_path, cfg.load);
                if (cfg.standardize) v = standardize(v);
                dist = skull_distance_map(v);
                json classes;
                for (int c = 0; c < kNumLabels; ++c)
                    classes[label_name(Label(c))] = tissue_volume_ml(v, Label(c));
                call.result = {{"grid", grid_to_json(v.grid())}, {"class_volumes_ml", classes}};
                vol = std::move(v);
            } else if (tool == "place") {
                std::vector<std::string> names;
                for (const auto& p : profiles) names.push_back(p.name);
                call.arguments = {{"interval_ml", cfg.center_interval_ml},
                                  {"max_candidates", cfg.max_candidates},
                                  {"profiles", names}};
                out.candidates = generate_candidates(*vol, *dist, profiles, cfg.search,
                                                     cfg.center_interval_ml, cfg.max_candidates);
                json ids = json::array();
                for (const auto& c : out.candidates.candidates) ids.push_back(c.id);
                call.result = {{"candidates", ids},
                               {"centers", out.candidates.centers.size()},
                               {"effective_interval_ml", out.candidates.effective_interval_ml}};
                have_candidates = true;
                have_report = false;  // metrics for a previous placement are stale
            } else if (tool == "evaluate") {
                call.arguments = {{"supersample", cfg.metrics_supersample}};
                out.report = evaluate_metrics(out.candidates, *vol, *dist, profiles,
                                              cfg.metrics_supersample, cfg.search.threads);
                call.result = {{"rows", out.report.rows.size()},
                               {"csv", report_to_csv(out.report)}};
                have_report = true;
            } else {  // complete
                call.arguments = {{"selector", cfg.selector}};
                if (llm_driven)
                    out.selection = llm_select(out.report, pref, *client, cfg.select, &tr);
                else {
                    out.selection = rule_based_select(out.report, pref);
                    tr.selector = out.selection.selector;
                    tr.justification = "rule selector: best " +
                                       std::string(preference_kind_name(pref.kind)) +
                                       " candidate";
                }
                call.result = {{"candidate", out.selection.id},
                               {"selector", out.selection.selector}};
            }
        } catch (const WorkflowError&) {
            throw;
        } catch (const std::exception& e) {
            call.error = e.what();
            tr.tool_calls.push_back(call);
            const bool endpoint = dynamic_cast<const EndpointError*>(&e) != nullptr;
            throw WorkflowError("tool '" + tool + "' failed: " + e.what(), tr, endpoint);
        }
        tr.tool_calls.push_back(call);
        return tr.tool_calls.back().result;
    };

    if (!llm_driven) {
        // Deterministic fixed plan: exactly four tool calls.
        for (const char* tool : {"segment", "place", "evaluate", "complete"}) {
            if (tr.iterations >= cfg.max_iterations)
                throw WorkflowError("iteration cap exceeded (" +
                                        std::to_string(cfg.max_iterations) + ")",
                                    tr);
            ++tr.iterations;
            run_tool(tool);
        }
    } else {
        std::vector<ChatMessage> messages;
        messages.push_back({"system", cfg.workflow_prompt});
        messages.push_back({"user", "Instruction: " + instruction + "\nVolume: " + volume_path +
                                        "\nPropose the first tool call."});
        tr.exchanges.push_back(messages[0]);
        tr.exchanges.push_back(messages[1]);

        bool completed = false;
        while (!completed) {
            if (tr.iterations >= cfg.max_iterations)
                throw WorkflowError("iteration cap exceeded (" +
                                        std::to_string(cfg.max_iterations) + ")",
                                    tr);
            ++tr.iterations;

            std::string reply;
            try {
                reply = client->complete(messages);
            } catch (const EndpointError& e) {
                tr.exchanges.push_back({"controller", std::string("endpoint error: ") + e.what()});
                throw WorkflowError(std::string("LLM endpoint failed: ") + e.what(), tr, true);
            }
            messages.push_back({"assistant", reply});
            tr.exchanges.push_back(messages.back());

            std::string why_not;
            const auto tool = detail::parse_tool_reply(reply, why_not);
            std::string rejection;
            if (!tool) {
                rejection = "Could not parse the proposal: " + why_not +
                            ". Reply with exactly one fenced code block containing "
                            "`tool: <segment|place|evaluate|complete>`.";
            } else if (*tool != "segment" && *tool != "place" && *tool != "evaluate" &&
                       *tool != "complete") {
                rejection = "Unknown tool '" + *tool +
                            "'. The registered tools are segment, place, evaluate, complete.";
            } else if (*tool == "segment" && vol.has_value()) {
                rejection = "segment already ran; it runs exactly once. Legal next tools: place.";
            } else if (*tool == "place" && !vol.has_value()) {
                rejection = "place requires segment first. Legal next tool: segment.";
            } else if (*tool == "evaluate" && !have_candidates) {
                rejection = "evaluate requires place first.";
            } else if (*tool == "complete" && !have_report) {
                rejection = "complete requires evaluate first.";
            }

            if (!rejection.empty()) {
                messages.push_back({"user", rejection});
                tr.exchanges.push_back({"controller", "rejected proposal: " + rejection});
                continue;
            }

            const json result = run_tool(*tool);
            if (*tool == "complete") {
                completed = true;
            } else {
                json summary = result;
                summary.erase("csv");  // the selection prompt carries the full table
                messages.push_back({"user", "tool " + *tool + " succeeded: " + summary.dump() +
                                                "\nPropose the next tool call."});
                tr.exchanges.push_back(messages.back());
            }
        }
    }

    tr.final_candidate_id = out.selection.id;
    tr.final_theta = out.selection.theta;
    if (tr.justification.empty()) tr.justification = "selected " + out.selection.id;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json metrics_row_to_json(const MetricsRow& r, const std::vector<std::string>& names) {
    json totals;
    for (size_t i = 0; i < names.size() && i < r.objective_totals.size(); ++i)
        totals[names[i]] = r.objective_totals[i];
    return json{{"id", r.id},
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
                {"objective_totals", totals}};
}

inline json selection_to_json(const SelectionResult& sel) {
    return json{{"candidate", sel.id},
                {"theta", theta_to_json(sel.theta)},
                {"selector", sel.selector},
                {"metrics", metrics_row_to_json(sel.row, sel.profile_names)}};
}

inline json transcript_to_json(const AgentTranscript& tr) {
    json calls = json::array();
    for (const auto& c : tr.tool_calls) {
        json jc{{"tool", c.tool}, {"arguments", c.arguments}};
        if (c.error.empty())
            jc["result"] = c.result;
        else
            jc["error"] = c.error;
        calls.push_back(jc);
    }
    json msgs = json::array();
    for (const auto& m : tr.exchanges) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return json{{"tool_calls", calls},
                {"exchanges", msgs},
                {"selector", tr.selector},
                {"iterations", tr.iterations},
                {"final", json{{"candidate", tr.final_candidate_id},
                               {"theta", theta_to_json(tr.final_theta)},
                               {"justification", tr.justification}}}};
}

}  // namespace voiplace

// End-to-end tests of the command-line tool: exit codes, stdout shapes,
// artifact files, and the agent loop against the scripted mock endpoint.

#include <csignal>
#include <cstdlib>
#include <sys/wait.h>

#include <chrono>
#include <thread>

#include <catch2/catch_amalgamated.hpp>

#include "voiplace/agent.hpp"

#include "test_support.hpp"

using namespace voiplace;
using namespace testsupport;
using Catch::Matchers::ContainsSubstring;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

// Run the tool with the given argument string; capture exit code and streams.
RunResult run_cli(const std::string& args) {
    const std::string so = temp_path("cli_out", ".txt");
    const std::string se = temp_path("cli_err", ".txt");
    const std::string cmd =
        std::string(VOIPLACE_BIN_PATH) + " " + args + " > " + so + " 2> " + se;
    const int rc = std::system(cmd.c_str());
    RunResult r;
    if (rc >= 0 && WIFEXITED(rc)) r.code = WEXITSTATUS(rc);
    r.out = slurp(so);
    r.err = slurp(se);
    std::remove(so.c_str());
    std::remove(se.c_str());
    return r;
}

// Cube phantom on disk, shared by every test in this binary.
const std::string& cube_file() {
    static const std::string path = [] {
        std::string p = temp_path("cli_cube", ".json");
        write_volume(p, cube_case().volume);
        return p;
    }();
    return path;
}

std::string tool_reply(const std::string& tool) { return "```\ntool: " + tool + "\n```"; }
std::string selection_reply(const std::string& id) {
    return "```\ncandidate: " + id + "\nreason: fits the instruction\n```";
}

// Background mock chat-completions endpoint. Finds its own free port and
// reports it on stdout; stopped via POST /quit (SIGKILL as a last resort).
struct MockServer {
    int port = -1;
    long pid = -1;
    std::string log = temp_path("mock_log", ".txt");
    std::string pidfile = temp_path("mock_pid", ".txt");

    explicit MockServer(const std::string& script_path) {
        const std::string cmd = std::string(MOCK_LLM_BIN_PATH) + " --script " + script_path +
                                " --port 0 > " + log + " 2>&1 & echo $! > " + pidfile;
        if (std::system(cmd.c_str()) != 0) return;
        for (int i = 0; i < 100 && port < 0; ++i) {
            const std::string text = slurp(log);
            const auto pos = text.find("listening on ");
            if (pos != std::string::npos) {
                port = std::atoi(text.c_str() + pos + 13);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        const std::string pid_text = slurp(pidfile);
        if (!pid_text.empty()) pid = std::atol(pid_text.c_str());
    }

    ~MockServer() {
        if (port > 0) {
            httplib::Client cli("127.0.0.1", port);
            cli.set_connection_timeout(2, 0);
            cli.Post("/quit", "", "text/plain");
        }
        if (pid > 1) {
            for (int i = 0; i < 20 && ::kill(pid_t(pid), 0) == 0; ++i)
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            ::kill(pid_t(pid), SIGKILL);
        }
        std::remove(log.c_str());
        std::remove(pidfile.c_str());
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

// Arguments that keep search-heavy subcommands down to a couple of seconds.
const std::string kFastSearch = " --interval 4 --cap 3 --threads 1 ";

}  // namespace

TEST_CASE("help, version, and usage errors") {
    RunResult help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK_THAT(help.out, ContainsSubstring("place"));
    CHECK_THAT(help.out, ContainsSubstring("candidates"));
    CHECK_THAT(help.out, ContainsSubstring("agent"));

    RunResult version = run_cli("--version");
    CHECK(version.code == 0);
    CHECK_THAT(version.out, ContainsSubstring(kVersion));

    CHECK(run_cli("").code == 1);                    // a subcommand is required
    CHECK(run_cli("--no-such-flag").code == 1);      // unknown flag
    CHECK(run_cli("place").code == 1);               // missing required volume
    CHECK(run_cli("frobnicate x.nii").code == 1);    // unknown subcommand
}

TEST_CASE("missing input volume is a data error naming the path") {
    RunResult r = run_cli("info /nonexistent/case.nii");
    CHECK(r.code == 2);
    CHECK_THAT(r.err, ContainsSubstring("data error"));
    CHECK_THAT(r.err, ContainsSubstring("/nonexistent/case.nii"));
}

TEST_CASE("phantom generation and info") {
    const std::string out = temp_path("cli_phantom", ".json");

    RunResult both = run_cli("phantom --cube --spec s.json -o " + out);
    CHECK(both.code == 1);  // --cube and --spec are mutually exclusive
    CHECK_THAT(both.err, ContainsSubstring("usage error"));

    RunResult gen = run_cli("phantom --cube -o " + out);
    REQUIRE(gen.code == 0);
    CHECK_THAT(gen.out, ContainsSubstring("wrote " + out));
    CHECK_THAT(gen.out, ContainsSubstring("SolidTumor"));

    // The written volume matches the library output byte-for-byte.
    CHECK(slurp(raw_sibling_path(out)) == slurp(raw_sibling_path(cube_file())));

    RunResult info = run_cli("info " + out);
    CHECK(info.code == 0);
    CHECK_THAT(info.out, ContainsSubstring("dims: 128 x 128 x 128"));
    CHECK_THAT(info.out, ContainsSubstring("SolidTumor: 1728 voxels"));

    std::remove(out.c_str());
    std::remove(raw_sibling_path(out).c_str());
}

TEST_CASE("place finds the exact cover on the cube and writes an artifact") {
    const std::string art_path = temp_path("cli_placement", ".json");
    RunResult r = run_cli("place " + cube_file() + " --threads 1 -o " + art_path);
    REQUIRE(r.code == 0);

    json printed = json::parse(r.out);
    CHECK(printed.at("objective").at("total").get<double>() >= 0.999);
    CHECK(printed.at("overlap").at("fvoi_solid").get<double>() >= 0.999);

    json art = read_json_file(art_path);
    CHECK(art.at("artifact") == "placement");
    CHECK(art.at("tool") == "voiplace");
    CHECK(art.at("inputs").at("volume").at("sha256").get<std::string>().size() == 64);
    PlacementResult res = placement_from_json(art.at("result"));
    CHECK(res.provenance.to_string() == "full");

    SECTION("export-mask rasterizes the stored placement") {
        const std::string mask_path = temp_path("cli_mask", ".json");
        RunResult m = run_cli("export-mask " + cube_file() + " " + art_path + " " + mask_path);
        REQUIRE(m.code == 0);
        CHECK_THAT(m.out, ContainsSubstring("voxels"));

        const MaskVolume expect = rasterize(res.theta, cube_case().volume.grid());
        size_t expect_in = 0;
        for (uint8_t x : expect.data) expect_in += x;

        LabelVolume mask = load_label_volume(mask_path, LoadOptions{});
        CHECK(size_t(mask.class_count(Label(1))) == expect_in);
        CHECK(mask.class_count(Label(1)) + mask.class_count(Label(0)) ==
              int64_t(mask.grid().voxel_count()));
        std::remove(mask_path.c_str());
        std::remove(raw_sibling_path(mask_path).c_str());
    }
    std::remove(art_path.c_str());
}

TEST_CASE("candidates then metrics, csv and json outputs") {
    const std::string cands_path = temp_path("cli_cands", ".json");
    CHECK(run_cli("candidates " + cube_file()).code == 1);  // -o is required

    RunResult gen = run_cli("candidates " + cube_file() + kFastSearch + "--seed 7 -o " +
                            cands_path);
    REQUIRE(gen.code == 0);
    CHECK_THAT(gen.out, ContainsSubstring("candidates from"));
    CHECK_THAT(gen.out, ContainsSubstring("centers"));

    json art = read_json_file(cands_path);
    CHECK(art.at("artifact") == "candidates");
    CandidateSet set = candidate_set_from_json(art.at("result"));
    REQUIRE(!set.candidates.empty());
    CHECK(set.candidates[0].id == "c1");
    CHECK(set.profile_names == std::vector<std::string>{"balanced", "large_voi"});

    SECTION("metrics to stdout and to csv") {
        RunResult stdout_run =
            run_cli("metrics " + cube_file() + " " + cands_path + " --threads 1");
        REQUIRE(stdout_run.code == 0);
        CHECK(stdout_run.out.rfind("id,provenance,profile,center_x_mm", 0) == 0);

        const std::string csv_path = temp_path("cli_report", ".csv");
        RunResult csv_run = run_cli("metrics " + cube_file() + " " + cands_path +
                                    " --threads 1 -o " + csv_path);
        REQUIRE(csv_run.code == 0);
        const std::string csv = slurp(csv_path);
        CHECK(csv == stdout_run.out);
        const size_t lines = size_t(std::count(csv.begin(), csv.end(), '\n'));
        CHECK(lines == set.candidates.size() + 1);
        std::remove(csv_path.c_str());
    }

    SECTION("metrics to a json artifact") {
        const std::string rep_path = temp_path("cli_report", ".json");
        RunResult r = run_cli("metrics " + cube_file() + " " + cands_path +
                              " --threads 1 -o " + rep_path);
        REQUIRE(r.code == 0);
        json rep_art = read_json_file(rep_path);
        CHECK(rep_art.at("artifact") == "metrics");
        MetricsReport rep = report_from_json(rep_art.at("result"));
        CHECK(rep.rows.size() == set.candidates.size());
        std::remove(rep_path.c_str());
    }

    SECTION("single-profile shorthand narrows the objective columns") {
        RunResult r = run_cli("metrics " + cube_file() + " " + cands_path +
                              " --threads 1 --profile large_voi");
        REQUIRE(r.code == 0);
        const std::string header = r.out.substr(0, r.out.find('\n'));
        CHECK_THAT(header, ContainsSubstring("objective_large_voi"));
        CHECK(header.find("objective_balanced") == std::string::npos);
    }

    SECTION("metrics on a mismatched grid is a data error") {
        const std::string other = temp_path("cli_other_grid", ".json");
        write_volume(other, all_brain(small_grid(21, 2.0)));
        RunResult r = run_cli("metrics " + other + " " + cands_path + " --threads 1");
        CHECK(r.code == 2);
        CHECK_THAT(r.err, ContainsSubstring("data error"));
        std::remove(other.c_str());
        std::remove(raw_sibling_path(other).c_str());
    }

    SECTION("candidate artifacts are byte-identical across thread counts") {
        const std::string again = temp_path("cli_cands_t4", ".json");
        RunResult r = run_cli("candidates " + cube_file() +
                              " --interval 4 --cap 3 --threads 4 --seed 7 -o " + again);
        REQUIRE(r.code == 0);
        CHECK(slurp(again) == slurp(cands_path));
        std::remove(again.c_str());
    }

    std::remove(cands_path.c_str());
}

TEST_CASE("agent with the rule selector, end to end") {
    const std::string sel_path = temp_path("cli_selection", ".json");
    const std::string tr_path = temp_path("cli_transcript", ".json");
    RunResult r = run_cli("agent " + cube_file() +
                          " --instruction \"cover the solid tumor\" --selector rule" +
                          kFastSearch + "--supersample 2 -o " + sel_path + " --transcript " +
                          tr_path);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("via rule in 4 iterations"));

    json sel = read_json_file(sel_path);
    CHECK(sel.at("artifact") == "selection");
    CHECK(sel.at("result").at("selector") == "rule");
    CHECK(sel.at("config").at("preference") == "MaximizeSolidCoverage");
    CHECK(sel.at("config").at("preference_warning") == false);
    CHECK_FALSE(sel.at("config").contains("llm"));

    json tr = read_json_file(tr_path);
    CHECK(tr.at("artifact") == "transcript");
    REQUIRE(tr.at("result").at("tool_calls").size() == 4);
    CHECK(tr.at("result").at("tool_calls")[0].at("tool") == "segment");
    CHECK(tr.at("result").at("final").at("candidate") == sel.at("result").at("candidate"));

    std::remove(sel_path.c_str());
    std::remove(tr_path.c_str());
}

TEST_CASE("agent warns when no preference keyword matches") {
    RunResult r = run_cli("agent " + cube_file() +
                          " --instruction \"do something sensible\" --selector rule" +
                          kFastSearch + "--supersample 2");
    REQUIRE(r.code == 0);
    CHECK_THAT(r.err, ContainsSubstring("no preference keyword matched"));
    CHECK_THAT(r.out, ContainsSubstring("selected c"));
    // Without -o the selection json goes to stdout.
    CHECK_THAT(r.out, ContainsSubstring("\"selector\": \"rule\""));
}

TEST_CASE("agent with the llm selector against the mock endpoint") {
    const std::string script_path = temp_path("cli_script", ".json");
    write_json_file(script_path,
                    json{{"replies",
                          json::array({tool_reply("segment"), tool_reply("place"),
                                       tool_reply("evaluate"), tool_reply("complete"),
                                       selection_reply("c1")})}});
    MockServer server(script_path);
    if (server.port <= 0) {
        std::remove(script_path.c_str());
        SKIP("mock endpoint could not bind a loopback port in this environment");
    }

    const std::string sel_path = temp_path("cli_llm_selection", ".json");
    const std::string tr_path = temp_path("cli_llm_transcript", ".json");
    RunResult r = run_cli("agent " + cube_file() +
                          " --instruction \"cover the solid tumor\" --selector llm --llm-url " +
                          server.url() + " --llm-model scripted" + kFastSearch +
                          "--supersample 2 -o " + sel_path + " --transcript " + tr_path);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.out, ContainsSubstring("via llm (" + server.url() + ", scripted)"));

    json sel = read_json_file(sel_path);
    CHECK(sel.at("result").at("candidate") == "c1");
    CHECK(sel.at("result").at("selector") == "llm (" + server.url() + ", scripted)");
    CHECK(sel.at("config").at("llm").at("model") == "scripted");

    json tr = read_json_file(tr_path);
    CHECK(tr.at("result").at("iterations") == 4);
    REQUIRE(tr.at("result").at("tool_calls").size() == 4);
    CHECK(tr.at("result").at("tool_calls")[3].at("tool") == "complete");

    std::remove(script_path.c_str());
    std::remove(sel_path.c_str());
    std::remove(tr_path.c_str());
}

TEST_CASE("agent with an unreachable llm endpoint exits with the tool-error code") {
    const std::string tr_path = temp_path("cli_fail_transcript", ".json");
    RunResult r = run_cli("agent " + cube_file() +
                          " --instruction \"cover the tumor\" --selector llm"
                          " --llm-url http://127.0.0.1:9 --llm-model x" +
                          kFastSearch + "--supersample 2 --transcript " + tr_path);
    CHECK(r.code == 3);
    CHECK_THAT(r.err, ContainsSubstring("agent error"));
    // The transcript is still written so the failure can be diagnosed.
    json tr = read_json_file(tr_path);
    CHECK(tr.at("artifact") == "transcript");
    std::remove(tr_path.c_str());
}

TEST_CASE("bench aggregates suite statistics") {
    RunResult r = run_cli("bench --suite box --cases 2 --threads 1");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("profile,metric,mean,sd,cases", 0) == 0);
    CHECK_THAT(r.out, ContainsSubstring("balanced,objective_total,"));
    CHECK_THAT(r.out, ContainsSubstring("large_voi,voi_volume_ml,"));
    CHECK_THAT(r.out, ContainsSubstring(",2\n"));
}

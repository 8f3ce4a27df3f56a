// Scripted stand-in for a chat-completions endpoint, for tests and demos.
// Plays back a fixed list of assistant replies in request order, regardless
// of request content.
//
// Script file: {"replies": ["...", ...], "repeat_last": false} or a bare
// json array of reply strings.
//
// Prints "listening on <port>" once the socket is bound (use --port 0 to let
// the OS pick a free port). POST /quit stops the server.

#include <cstdio>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "voiplace/json_io.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"Scripted mock chat-completions endpoint"};
    std::string script_path, host = "127.0.0.1";
    int port = 0;
    app.add_option("--script", script_path, "Reply script (json)")->required();
    app.add_option("--port", port, "Port (0 = pick a free one)")->capture_default_str();
    app.add_option("--host", host, "Bind address")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::vector<std::string> replies;
    bool repeat_last = false;
    try {
        const json script = voiplace::read_json_file(script_path);
        const json& list = script.is_array() ? script : script.at("replies");
        for (const auto& r : list) replies.push_back(r.get<std::string>());
        if (script.is_object() && script.contains("repeat_last"))
            repeat_last = script.at("repeat_last").get<bool>();
    } catch (const std::exception& e) {
        std::cerr << "bad script: " << e.what() << "\n";
        return 2;
    }

    httplib::Server svr;
    std::mutex mu;
    size_t next = 0;

    svr.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        std::string reply;
        bool have = false;
        {
            std::lock_guard<std::mutex> lock(mu);
            if (next < replies.size()) {
                reply = replies[next++];
                have = true;
            } else if (repeat_last && !replies.empty()) {
                reply = replies.back();
                have = true;
            }
        }
        if (!have) {
            res.status = 500;
            res.set_content(json{{"error", "script exhausted"}}.dump(), "application/json");
            return;
        }
        const json body{
            {"object", "chat.completion"},
            {"choices",
             json::array({json{{"index", 0},
                               {"message", json{{"role", "assistant"}, {"content", reply}}},
                               {"finish_reason", "stop"}}})}};
        res.set_content(body.dump(), "application/json");
    });
    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok", "text/plain");
    });
    svr.Post("/quit", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("bye", "text/plain");
        svr.stop();
    });

    if (port == 0) {
        port = svr.bind_to_any_port(host);
        if (port < 0) {
            std::cerr << "cannot bind to " << host << "\n";
            return 3;
        }
        std::cout << "listening on " << port << std::endl;
        return svr.listen_after_bind() ? 0 : 3;
    }
    if (!svr.bind_to_port(host, port)) {
        std::cerr << "cannot bind to " << host << ":" << port << "\n";
        return 3;
    }
    std::cout << "listening on " << port << std::endl;
    return svr.listen_after_bind() ? 0 : 3;
}

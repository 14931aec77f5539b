// Canned chat-completions endpoint for exercising the query client by hand:
// fixed reply text, optional injected failures, optional bearer-token check.

#include <atomic>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
    CLI::App app{"mock chat-completions server"};
    std::string host = "127.0.0.1";
    int port = 8741;
    std::string reply = "ANSWER: A";
    std::string require_key;
    int fail_first = 0;
    int fail_status = 500;
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "bind port");
    app.add_option("--reply", reply, "assistant message returned for every request");
    app.add_option("--require-key", require_key, "reject requests without this bearer token");
    app.add_option("--fail-first", fail_first, "fail this many requests before succeeding");
    app.add_option("--fail-status", fail_status, "status code for injected failures");
    CLI11_PARSE(app, argc, argv);

    std::atomic<int> requests{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        const int n = requests.fetch_add(1) + 1;
        if (!require_key.empty() &&
            req.get_header_value("Authorization") != "Bearer " + require_key) {
            res.status = 401;
            res.set_content(R"({"error":"bad credentials"})", "application/json");
            return;
        }
        if (n <= fail_first) {
            res.status = fail_status;
            res.set_content(R"({"error":"injected failure"})", "application/json");
            return;
        }
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            res.status = 400;
            res.set_content(R"({"error":"bad json"})", "application/json");
            return;
        }
        nlohmann::json out;
        out["model"] = body.value("model", "mock-model");
        out["choices"] = {{{"message", {{"role", "assistant"}, {"content", reply}}}}};
        out["usage"] = {{"prompt_tokens", 1}, {"completion_tokens", 1}};
        res.set_content(out.dump(), "application/json");
    });

    std::cout << "mock server listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        std::cerr << "failed to bind " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

#include "termharness/gateway.hpp"
#include "termharness/http_gateway.hpp"
#include "termharness/scripted_gateway.hpp"

#include "termharness/errors.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <thread>

using namespace termharness;
using json = nlohmann::json;

namespace {

ChatRequest simple_request(const std::string& content) {
    ChatRequest request;
    request.model = "m";
    request.messages.push_back(make_user_message(content));
    return request;
}

} // namespace

TEST_CASE("scripted gateway replays steps in order and then exhausts") {
    ScriptedGateway gateway({text_step("one"), text_step("two"), text_step("three")});
    CHECK(gateway.complete(simple_request("a")).message.content == "one");
    CHECK(gateway.complete(simple_request("b")).message.content == "two");
    CHECK(gateway.complete(simple_request("c")).message.content == "three");
    try {
        gateway.complete(simple_request("d"));
        FAIL("expected ScriptExhausted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ScriptExhausted);
    }
}

TEST_CASE("scripted gateway loops the last step when asked") {
    ScriptedGateway gateway({text_step("only")}, true);
    for (int i = 0; i < 5; ++i) {
        CHECK(gateway.complete(simple_request("x")).message.content == "only");
    }
}

TEST_CASE("scripted gateway surfaces fixture assertions with the step index") {
    ScriptStep step = text_step("ok");
    step.expect_has_tool = "run_in_terminal";
    ScriptedGateway gateway({step});
    try {
        gateway.complete(simple_request("no tools attached"));
        FAIL("expected FixtureAssertion");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FixtureAssertion);
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
        CHECK(std::string(e.what()).find("run_in_terminal") != std::string::npos);
    }
}

TEST_CASE("scripted gateway checks last-message content and role") {
    ScriptStep step = text_step("ok");
    step.expect_last_role = "user";
    step.expect_contains = "build the project";
    ScriptedGateway gateway({step});
    CHECK(gateway.complete(simple_request("please build the project now")).message.content == "ok");

    ScriptedGateway strict({step});
    CHECK_THROWS_AS(strict.complete(simple_request("different text")), Error);
}

TEST_CASE("scripted fixture loads from JSON") {
    const std::string fixture = R"({
      "loop_last": true,
      "script": [
        {"expect": {"last_role": "user"},
         "respond": {"content": "", "completion_tokens": 7,
                     "tool_calls": [{"name": "run_in_terminal",
                                     "arguments": {"command": "true", "mode": "sync",
                                                   "timeout": 30000}}]}},
        {"respond": {"content": "<final_answer>\nCommand: true\nSummary: ok\n</final_answer>"}}
      ]})";
    Script script = Script::from_json_text(fixture);
    CHECK(script.loop_last);
    REQUIRE(script.steps.size() == 2);
    ScriptedGateway gateway(script);
    ChatResponse first = gateway.complete(simple_request("go"));
    REQUIRE(first.message.tool_calls.size() == 1);
    CHECK(first.message.tool_calls[0].name == "run_in_terminal");
    CHECK(first.message.tool_calls[0].arguments.at("command") == "true");
    CHECK(first.message.tool_calls[0].arguments.at("timeout") == "30000");
    CHECK(first.completion_tokens == 7);
    CHECK(first.finish_reason == FinishReason::tool_call);
}

TEST_CASE("http gateway round-trips against a local stub server") {
    httplib::Server server;
    json seen_request;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_request = json::parse(req.body);
        json reply{{"choices",
                    {{{"message",
                       {{"role", "assistant"},
                        {"content", ""},
                        {"tool_calls",
                         {{{"id", "call_9"},
                           {"type", "function"},
                           {"function",
                            {{"name", "run_in_terminal"},
                             {"arguments", "{\"command\":\"make\",\"mode\":\"sync\",\"timeout\":120000}"}}}}}}}},
                      {"finish_reason", "tool_calls"}}}},
                   {"usage", {{"prompt_tokens", 42}, {"completion_tokens", 17}}}};
        res.set_content(reply.dump(), "application/json");
    });

    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpGatewaySettings settings;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    settings.api_key = "sk-test";
    settings.retries = 0;
    HttpGateway gateway(settings);

    ChatRequest request;
    request.model = "test-model";
    request.temperature = 0.5;
    request.messages.push_back(make_system_message("sys"));
    request.messages.push_back(make_user_message("run make"));
    request.tools.push_back(
        {"run_in_terminal", "Execute a shell command", R"({"type":"object"})"});

    ChatResponse response = gateway.complete(request);
    server.stop();
    server_thread.join();

    CHECK(seen_request["model"] == "test-model");
    CHECK(seen_request["messages"].size() == 2);
    CHECK(seen_request["messages"][0]["role"] == "system");
    CHECK(seen_request["tools"][0]["function"]["name"] == "run_in_terminal");

    CHECK(response.prompt_tokens == 42);
    CHECK(response.completion_tokens == 17);
    CHECK(response.finish_reason == FinishReason::tool_call);
    REQUIRE(response.message.tool_calls.size() == 1);
    CHECK(response.message.tool_calls[0].arguments.at("command") == "make");
    CHECK(response.message.tool_calls[0].arguments.at("timeout") == "120000");
}

TEST_CASE("http gateway retries transient 5xx and then succeeds") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits <= 2) {
            res.status = 503;
            res.set_content("overloaded", "text/plain");
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"recovered"}}],)"
                        R"("usage":{"prompt_tokens":1,"completion_tokens":1}})",
                        "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&]() { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpGatewaySettings settings;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    settings.retries = 3;
    settings.retry_backoff_ms = 1;
    HttpGateway gateway(settings);
    ChatResponse response = gateway.complete(simple_request("x"));
    server.stop();
    server_thread.join();

    CHECK(response.message.content == "recovered");
    CHECK(hits.load() == 3);
}

TEST_CASE("http gateway fails with GatewayFailure against a closed port") {
    HttpGatewaySettings settings;
    settings.base_url = "http://127.0.0.1:9/v1"; // discard port, nothing listens
    settings.retries = 1;
    settings.retry_backoff_ms = 1;
    settings.timeout_sec = 1;
    HttpGateway gateway(settings);
    try {
        gateway.complete(simple_request("hello"));
        FAIL("expected GatewayFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::GatewayFailure);
    }
}

TEST_CASE("concurrency cap serializes when set to one") {
    struct SlowGateway final : ChatGateway {
        std::atomic<int>* in_flight;
        std::atomic<int>* max_seen;
        ChatResponse complete(const ChatRequest&) override {
            int now = ++*in_flight;
            int seen = max_seen->load();
            while (now > seen && !max_seen->compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
            --*in_flight;
            ChatResponse response;
            response.message = make_assistant_message("ok");
            return response;
        }
    };

    std::atomic<int> in_flight{0};
    std::atomic<int> max_seen{0};
    auto cap = std::make_shared<ConcurrencyCap>(1);

    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&]() {
            auto inner = std::make_unique<SlowGateway>();
            inner->in_flight = &in_flight;
            inner->max_seen = &max_seen;
            CappedGateway gateway(std::move(inner), cap);
            gateway.complete(simple_request("x"));
        });
    }
    for (auto& thread : threads) thread.join();
    CHECK(max_seen.load() == 1);
}

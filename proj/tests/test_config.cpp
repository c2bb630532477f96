#include "termharness/config.hpp"

#include "termharness/errors.hpp"
#include "termharness/util.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace termharness;

TEST_CASE("config: load, overrides and rejection of unknown keys") {
    TempDir dir;
    write_text_file(dir.path() / "config.txt",
                    "# test config\n"
                    "gateway.backend = scripted\n"
                    "gateway.script_subagent = /tmp/fixture.json\n"
                    "subagent.turn_limit = 5\n"
                    "reward.alpha = 0.25\n"
                    "grpo.eps_high = 0.3\n"
                    "sandbox.shell = /bin/bash\n");
    Config config = Config::load(dir.path() / "config.txt");
    CHECK(config.subagent_turn_limit == 5);
    CHECK(config.reward.alpha == doctest::Approx(0.25));
    CHECK(config.grpo.eps_high == doctest::Approx(0.3));
    CHECK(config.sandbox.shell == "/bin/bash");

    write_text_file(dir.path() / "bad.txt", "gateway.bogus_key = 1\n");
    try {
        Config::load(dir.path() / "bad.txt");
        FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigInvalid);
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }

    write_text_file(dir.path() / "badvalue.txt", "subagent.turn_limit = soon\n");
    CHECK_THROWS_AS(Config::load(dir.path() / "badvalue.txt"), Error);
}

TEST_CASE("config: environment variables override file values") {
    TempDir dir;
    write_text_file(dir.path() / "config.txt", "reward.alpha = 0.5\n");
    setenv("TERMHARNESS_REWARD_ALPHA", "0.75", 1);
    Config config = Config::load(dir.path() / "config.txt");
    unsetenv("TERMHARNESS_REWARD_ALPHA");
    CHECK(config.reward.alpha == doctest::Approx(0.75));
}

TEST_CASE("config: validation catches out-of-range values") {
    TempDir dir;
    write_text_file(dir.path() / "alpha.txt", "reward.alpha = 1.5\n");
    CHECK_THROWS_AS(Config::load(dir.path() / "alpha.txt"), Error);

    write_text_file(dir.path() / "limit.txt", "subagent.turn_limit = 0\n");
    CHECK_THROWS_AS(Config::load(dir.path() / "limit.txt"), Error);

    write_text_file(dir.path() / "backend.txt", "gateway.backend = carrier-pigeon\n");
    CHECK_THROWS_AS(Config::load(dir.path() / "backend.txt"), Error);
}

TEST_CASE("config: scripted gateway factory needs a fixture path") {
    Config config;
    CHECK_THROWS_AS(config.gateway_factory(GatewayRole::subagent), Error);

    TempDir dir;
    write_text_file(dir.path() / "fixture.json",
                    R"({"script": [{"respond": {"content": "hi"}}]})");
    config.script_subagent = (dir.path() / "fixture.json").string();
    GatewayFactory factory = config.gateway_factory(GatewayRole::subagent);
    auto gateway = factory();
    ChatRequest request;
    request.messages.push_back(make_user_message("x"));
    CHECK(gateway->complete(request).message.content == "hi");

    // Each factory call gets a fresh cursor.
    auto another = factory();
    CHECK(another->complete(request).message.content == "hi");
}

#pragma once

#include "termharness/gateway.hpp"

#include <cstdint>
#include <string>

namespace termharness {

struct HttpGatewaySettings {
    std::string base_url = "http://localhost:8000/v1";
    std::string api_key;          // usually from LLM_API_KEY
    int retries = 3;              // on transport errors and 5xx
    int64_t retry_backoff_ms = 250; // doubled after each attempt
    int64_t timeout_sec = 120;
};

// OpenAI-compatible chat-completions client. One wire round-trip per
// complete(), with bounded retries and exponential backoff.
class HttpGateway final : public ChatGateway {
public:
    explicit HttpGateway(HttpGatewaySettings settings);

    ChatResponse complete(const ChatRequest& request) override;

    // Wire serialization, exposed for tests.
    static std::string request_body(const ChatRequest& request);
    static ChatResponse parse_response(const std::string& body);

private:
    HttpGatewaySettings settings_;
    std::string host_;  // scheme://host:port
    std::string path_;  // path prefix, e.g. /v1
};

} // namespace termharness

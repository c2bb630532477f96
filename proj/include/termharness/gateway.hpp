#pragma once

#include "termharness/message.hpp"

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace termharness {

struct ToolSchema {
    std::string name;
    std::string description;
    std::string parameters_json; // JSON schema for the arguments object
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::vector<ToolSchema> tools;
    std::string model;
    double temperature = 0.0;
    int64_t max_output_tokens = 4096;
};

enum class FinishReason { stop, tool_call, length };

struct ChatResponse {
    ChatMessage message; // assistant
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
    FinishReason finish_reason = FinishReason::stop;
};

class ChatGateway {
public:
    virtual ~ChatGateway() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Sessions that need an independent backend each (e.g. one scripted cursor
// per rollout) are handed a factory instead of a shared gateway.
using GatewayFactory = std::function<std::unique_ptr<ChatGateway>()>;

// Shared cap on in-flight requests across all gateways built from one config.
class ConcurrencyCap {
public:
    explicit ConcurrencyCap(int max_in_flight);
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

// Decorator holding a slot in the shared cap for the duration of each call.
class CappedGateway final : public ChatGateway {
public:
    CappedGateway(std::unique_ptr<ChatGateway> inner, std::shared_ptr<ConcurrencyCap> cap)
        : inner_(std::move(inner)), cap_(std::move(cap)) {}

    ChatResponse complete(const ChatRequest& request) override;

private:
    std::unique_ptr<ChatGateway> inner_;
    std::shared_ptr<ConcurrencyCap> cap_;
};

} // namespace termharness

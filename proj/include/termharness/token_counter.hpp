#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace termharness {

// All token metrics in this project are relative to one of these counters;
// reports carry the counter name so numbers are comparable run to run.
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual int64_t count(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

// Whitespace-plus-punctuation approximation: each punctuation byte is one
// token, each maximal alphanumeric run contributes ceil(len/4) tokens.
// Deterministic, and concatenation can merge at most the two tokens that
// meet at the seam, so count(a+b) <= count(a) + count(b) + 1.
class ApproxTokenCounter final : public TokenCounter {
public:
    int64_t count(std::string_view text) const override;
    std::string name() const override { return "approx-ws4"; }
};

const TokenCounter& default_token_counter();

inline int64_t count_tokens(std::string_view text, const TokenCounter& counter) {
    return counter.count(text);
}

} // namespace termharness

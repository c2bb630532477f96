#include "termharness/token_counter.hpp"

#include <cctype>

namespace termharness {

int64_t ApproxTokenCounter::count(std::string_view text) const {
    int64_t tokens = 0;
    size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
            continue;
        }
        if (std::isalnum(c)) {
            size_t run = 0;
            while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i]))) {
                ++i;
                ++run;
            }
            tokens += static_cast<int64_t>((run + 3) / 4);
        } else {
            ++tokens;
            ++i;
        }
    }
    return tokens;
}

const TokenCounter& default_token_counter() {
    static ApproxTokenCounter counter;
    return counter;
}

} // namespace termharness

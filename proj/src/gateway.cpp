#include "termharness/gateway.hpp"

namespace termharness {

ConcurrencyCap::ConcurrencyCap(int max_in_flight) : available_(max_in_flight < 1 ? 1 : max_in_flight) {}

void ConcurrencyCap::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
}

void ConcurrencyCap::release() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

ChatResponse CappedGateway::complete(const ChatRequest& request) {
    cap_->acquire();
    struct Releaser {
        ConcurrencyCap* cap;
        ~Releaser() { cap->release(); }
    } releaser{cap_.get()};
    return inner_->complete(request);
}

} // namespace termharness

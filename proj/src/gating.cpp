#include "ded/gating.hpp"

#include "ded/errors.hpp"

namespace ded {

std::string_view to_string(PolicyKind kind) noexcept {
    switch (kind) {
        case PolicyKind::free_running: return "free_running";
        case PolicyKind::synchronous: return "synchronous";
    }
    return "unknown";
}

PolicyKind parse_policy_kind(std::string_view text) {
    if (text == "free_running" || text == "free-running") return PolicyKind::free_running;
    if (text == "synchronous") return PolicyKind::synchronous;
    throw ConfigError("unsupported gating scheme '" + std::string(text) +
                      "' (expected free_running or synchronous)");
}

std::unique_ptr<GatingPolicy> free_running_policy(const ModelDims& dims) {
    return std::make_unique<FreeRunningPolicy>(dims);
}

std::unique_ptr<GatingPolicy> synchronous_policy(const ModelDims& dims) {
    return std::make_unique<SynchronousPolicy>(dims);
}

std::unique_ptr<GatingPolicy> make_policy(PolicyKind kind, const ModelDims& dims) {
    switch (kind) {
        case PolicyKind::free_running: return free_running_policy(dims);
        case PolicyKind::synchronous: return synchronous_policy(dims);
    }
    throw ConfigError("unsupported gating scheme");
}

}  // namespace ded

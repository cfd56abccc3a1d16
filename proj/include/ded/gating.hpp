#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "ded/model.hpp"

namespace ded {

enum class PolicyKind { free_running, synchronous };

std::string_view to_string(PolicyKind kind) noexcept;
/// Accepts "free_running"/"free-running" and "synchronous". Throws ConfigError.
PolicyKind parse_policy_kind(std::string_view text);

/// Causal gating rule. The simulator calls gate(t, u) and then record(y) once
/// per bin, in increasing t, after reset(). Implementations keep O(1) state
/// and must close the gate for the D bins that follow any detection.
class GatingPolicy {
public:
    virtual ~GatingPolicy() = default;

    virtual void reset() = 0;
    /// Gate bit G_t given everything recorded so far and a uniform draw
    /// (ignored by deterministic rules).
    virtual bool gate(std::int64_t t, double u) = 0;
    /// Observed outcome Y_t of the bin just gated.
    virtual void record(bool detected) = 0;

    /// True if gate() consumes its uniform draw.
    virtual bool randomized() const { return false; }

    virtual std::unique_ptr<GatingPolicy> clone() const = 0;
};

/// Gate open whenever the dead-time timer is zero.
class FreeRunningPolicy final : public GatingPolicy {
public:
    explicit FreeRunningPolicy(const ModelDims& dims) : dead_time_(dims.D) {}

    void reset() override { timer_ = 0; }
    bool gate(std::int64_t, double) override { return timer_ == 0; }
    void record(bool detected) override {
        if (detected)
            timer_ = dead_time_;
        else if (timer_ > 0)
            --timer_;
    }
    std::unique_ptr<GatingPolicy> clone() const override {
        return std::make_unique<FreeRunningPolicy>(*this);
    }

    std::int64_t timer() const noexcept { return timer_; }

private:
    std::int64_t dead_time_;
    std::int64_t timer_ = 0;
};

/// Gate opens at a period start if the timer is zero there and closes for the
/// rest of the period after the first detection.
class SynchronousPolicy final : public GatingPolicy {
public:
    explicit SynchronousPolicy(const ModelDims& dims) : period_(dims.K), dead_time_(dims.D) {}

    void reset() override {
        timer_ = 0;
        period_open_ = true;
        detected_in_period_ = false;
    }
    bool gate(std::int64_t t, double) override {
        if (t % period_ == 0) {
            period_open_ = (timer_ == 0);
            detected_in_period_ = false;
        }
        return period_open_ && !detected_in_period_;
    }
    void record(bool detected) override {
        if (detected) {
            timer_ = dead_time_;
            detected_in_period_ = true;
        } else if (timer_ > 0) {
            --timer_;
        }
    }
    std::unique_ptr<GatingPolicy> clone() const override {
        return std::make_unique<SynchronousPolicy>(*this);
    }

private:
    std::int64_t period_;
    std::int64_t dead_time_;
    std::int64_t timer_ = 0;
    bool period_open_ = true;
    bool detected_in_period_ = false;
};

std::unique_ptr<GatingPolicy> free_running_policy(const ModelDims& dims);
std::unique_ptr<GatingPolicy> synchronous_policy(const ModelDims& dims);
std::unique_ptr<GatingPolicy> make_policy(PolicyKind kind, const ModelDims& dims);

}  // namespace ded

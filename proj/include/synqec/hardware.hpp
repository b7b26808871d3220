#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "synqec/rng.hpp"

// Flying-qubit channel model between the two QPUs. Latency is uniform within
// a per-platform band; the coupling intensity equals the synergy score, and
// cross-panel observation exchange is enabled only above a fixed intensity
// threshold.

namespace synqec::hw {

inline constexpr double kCommMs = 0.05;          // per-round classical exchange
inline constexpr double kGateThreshold = 0.2;    // intensity needed to open the channel
inline constexpr double kPhaseNoiseRefMs = 10.0; // latency that costs one full 2*pi*0.1

struct HardwareConfig {
    std::string name;
    double latency_lo_ms = 0.0;
    double latency_hi_ms = 0.0;
    double severity_weight = 1.0;  // weight in the robustness aggregate
};

inline HardwareConfig ideal_config() { return {"ideal", 0.05, 0.05, 1.0}; }
inline HardwareConfig cryostat_config() { return {"cryostat", 0.1, 0.2, 0.9}; }
inline HardwareConfig edge_config() { return {"edge", 1.0, 5.0, 0.75}; }
inline HardwareConfig distributed_config() { return {"distributed", 5.0, 10.0, 0.6}; }

inline std::vector<HardwareConfig> all_configs() {
    return {ideal_config(), cryostat_config(), edge_config(), distributed_config()};
}

// Wide band used for domain randomization during training.
inline HardwareConfig randomized_training_config() { return {"randomized", 0.5, 10.0, 1.0}; }

inline HardwareConfig config_by_name(const std::string& name) {
    for (const auto& c : all_configs())
        if (c.name == name) return c;
    if (name == "randomized") return randomized_training_config();
    throw std::invalid_argument("unknown hardware config: " + name);
}

// Transmission fidelity of the flying-qubit link as a function of coupling
// intensity and latency; clamped to [0,1].
inline double fidelity(double lambda, double tau_ms) {
    const double f = 0.50 + 0.49 * lambda - 0.05 * (tau_ms / 10.0);
    return std::clamp(f, 0.0, 1.0);
}

inline double sample_latency(const HardwareConfig& c, Rng& rng) {
    if (c.latency_hi_ms < c.latency_lo_ms)
        throw std::invalid_argument("latency band inverted");
    if (c.latency_hi_ms == c.latency_lo_ms) return c.latency_lo_ms;
    return rng.uniform(c.latency_lo_ms, c.latency_hi_ms);
}

struct ChannelSetting {
    double intensity = 0.0;   // = synergy score driving the link
    bool gated = false;       // cross-panel observation exchange enabled
    double latency_ms = 0.0;  // drawn transfer latency
};

inline ChannelSetting channel_setting(double lambda, double tau_ms) {
    ChannelSetting s;
    s.intensity = lambda;
    s.gated = lambda >= kGateThreshold;
    s.latency_ms = tau_ms;
    return s;
}

inline ChannelSetting channel_setting(double lambda, const HardwareConfig& c, Rng& rng) {
    return channel_setting(lambda, sample_latency(c, rng));
}

struct HardwareFeedback {
    double transmission_fidelity = 0.0;
    double entanglement_rate = 0.0;  // proxy: equal to the coupling intensity
    double phase_noise_rad = 0.0;    // proxy: grows linearly with latency
};

inline HardwareFeedback hardware_feedback(const ChannelSetting& s, int /*syndrome_bits*/ = 0) {
    HardwareFeedback f;
    f.transmission_fidelity = fidelity(s.intensity, s.latency_ms);
    f.entanglement_rate = s.intensity;
    f.phase_noise_rad = 0.1 * (s.latency_ms / kPhaseNoiseRefMs) * 2.0 * M_PI;
    return f;
}

struct DeadlineAdaptation {
    double lambda = 0.0;
    double step_cap_scale = 1.0;
    bool adapted = false;
};

// When the predicted decode latency exceeds the budget, dial the channel
// intensity down proportionally and shrink the episode step cap (never below
// a quarter).
inline DeadlineAdaptation deadline_adapt(double lambda, double t_pred_ms, double budget_ms) {
    DeadlineAdaptation a;
    if (t_pred_ms <= budget_ms) {
        a.lambda = lambda;
        a.step_cap_scale = 1.0;
        return a;
    }
    const double ratio = budget_ms / t_pred_ms;
    a.lambda = lambda * ratio;
    a.step_cap_scale = std::max(0.25, ratio);
    a.adapted = true;
    return a;
}

}  // namespace synqec::hw

#pragma once

#include "xdiff/net.hpp"

namespace xdiff {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adaptive-moment optimizer state. Moment accumulators mirror the parameter
/// shapes exactly; the step counter drives bias correction.
struct AdamState {
    std::vector<LayerGrads> m;
    std::vector<LayerGrads> v;
    long step_count = 0;
    AdamConfig cfg;

    static AdamState like(const FeedForwardNet& net, AdamConfig cfg = {});
};

/// One bias-corrected Adam update. Mutates `net` parameters and `state`
/// (both documented as state-advancing). Throws on non-finite gradients.
void adam_step(AdamState& state, FeedForwardNet& net, const NetGrads& grads, double lr = 1e-4);

/// Scale gradients so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
double clip_global_norm(NetGrads& grads, double max_norm);

}  // namespace xdiff

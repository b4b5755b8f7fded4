#include "xdiff/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace xdiff {

AdamState AdamState::like(const FeedForwardNet& net, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    NetGrads zero = NetGrads::like(net);
    s.m = zero.layers;
    s.v = zero.layers;
    return s;
}

void adam_step(AdamState& state, FeedForwardNet& net, const NetGrads& grads, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
    if (grads.layers.size() != net.layers.size() || state.m.size() != net.layers.size())
        throw std::invalid_argument("adam_step: layer count mismatch");
    if (!grads.finite())
        throw std::runtime_error("adam_step: non-finite gradient at step " +
                                 std::to_string(state.step_count + 1));

    state.step_count += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2, eps = state.cfg.eps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));

    for (size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        const LayerGrads& g = grads.layers[li];
        LayerGrads& m = state.m[li];
        LayerGrads& v = state.v[li];
        if (!g.w.same_shape(layer.w) || g.b.size() != layer.b.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(li));

        const long nw = layer.w.size();
        for (long i = 0; i < nw; ++i) {
            const double gi = g.w.data[i];
            m.w.data[i] = b1 * m.w.data[i] + (1.0 - b1) * gi;
            v.w.data[i] = b2 * v.w.data[i] + (1.0 - b2) * gi * gi;
            layer.w.data[i] -= lr * (m.w.data[i] / c1) / (std::sqrt(v.w.data[i] / c2) + eps);
        }
        for (size_t i = 0; i < layer.b.size(); ++i) {
            const double gi = g.b[i];
            m.b[i] = b1 * m.b[i] + (1.0 - b1) * gi;
            v.b[i] = b2 * v.b[i] + (1.0 - b2) * gi * gi;
            layer.b[i] -= lr * (m.b[i] / c1) / (std::sqrt(v.b[i] / c2) + eps);
        }
    }
}

double clip_global_norm(NetGrads& grads, double max_norm) {
    const double norm = std::sqrt(grads.squared_norm());
    if (std::isfinite(norm) && norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
    return norm;
}

}  // namespace xdiff

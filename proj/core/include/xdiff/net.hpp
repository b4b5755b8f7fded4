#pragma once

#include <vector>

#include "xdiff/matrix.hpp"
#include "xdiff/rng.hpp"

namespace xdiff {

enum class Activation { linear = 0, tanh_act = 1, silu = 2 };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One affine layer. Weights are (fan_out x fan_in), applied as y = W x + b,
/// followed by the layer's activation.
struct Layer {
    Matrix w;
    Vec b;
    Activation act = Activation::linear;

    int fan_in() const { return w.cols; }
    int fan_out() const { return w.rows; }
};

/// Plain fully connected stack. Forward/backward are pure functions of
/// (parameters, input); nothing is cached on the net itself.
struct FeedForwardNet {
    int input_width = 0;
    int output_width = 0;
    std::vector<Layer> layers;

    long param_count() const;
};

/// Gradient (or moment) buffers with the exact shape of the parameter set.
struct LayerGrads {
    Matrix w;
    Vec b;
};

struct NetGrads {
    std::vector<LayerGrads> layers;

    static NetGrads like(const FeedForwardNet& net);
    void zero();
    void scale(double s);
    double squared_norm() const;
    bool finite() const;
};

/// He-style init: w ~ N(0, 1/fan_in), b = 0. Hidden layers share `hidden_act`,
/// the output layer is linear.
FeedForwardNet make_net(int input_width, const std::vector<int>& hidden_widths,
                        int output_width, Activation hidden_act, SeededRng& rng);

Vec net_forward(const FeedForwardNet& net, const Vec& x);

/// Batched forward: X is (batch x input_width), result (batch x output_width).
Matrix net_forward_batch(const FeedForwardNet& net, const Matrix& X);

struct BackwardResult {
    NetGrads grads;
    Vec input_grad;
};

/// Exact gradients of (upstream_grad . output) w.r.t. every parameter and the
/// input. Recomputes the forward pass internally.
BackwardResult net_backward(const FeedForwardNet& net, const Vec& x, const Vec& upstream_grad);

struct BatchBackwardResult {
    NetGrads grads;     // summed over the batch
    Matrix input_grad;  // per-row input gradients
};

BatchBackwardResult net_backward_batch(const FeedForwardNet& net, const Matrix& X,
                                       const Matrix& upstream_grad);

/// Sinusoidal embedding of a diffusion step index, transformer-style
/// interleaved (sin, cos) pairs over geometrically spaced frequencies.
Vec step_embedding(int k, int dim);

bool nets_equal(const FeedForwardNet& a, const FeedForwardNet& b);

}  // namespace xdiff

#include "xdiff/net.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace xdiff {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::tanh_act: return "tanh";
        case Activation::silu: return "silu";
    }
    return "unknown";
}

Activation activation_from_name(const std::string& name) {
    if (name == "linear") return Activation::linear;
    if (name == "tanh") return Activation::tanh_act;
    if (name == "silu") return Activation::silu;
    throw std::invalid_argument("unknown activation: " + name);
}

namespace {

inline double act_value(Activation a, double z) {
    switch (a) {
        case Activation::linear: return z;
        case Activation::tanh_act: return std::tanh(z);
        case Activation::silu: return z / (1.0 + std::exp(-z));
    }
    return z;
}

// derivative expressed from the pre-activation z
inline double act_deriv(Activation a, double z) {
    switch (a) {
        case Activation::linear: return 1.0;
        case Activation::tanh_act: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::silu: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 + z * (1.0 - s));
        }
    }
    return 1.0;
}

// Y += X * W^T, X:(n x in), W:(out x in), Y:(n x out). Row-major dot products.
void affine_forward(const Matrix& X, const Layer& layer, Matrix& Y) {
    const int n = X.rows, in = layer.fan_in(), out = layer.fan_out();
    for (int i = 0; i < n; ++i) {
        const double* xi = X.row(i);
        double* yi = Y.row(i);
        for (int o = 0; o < out; ++o) {
            const double* wo = layer.w.row(o);
            double acc = layer.b[o];
            for (int j = 0; j < in; ++j) acc += wo[j] * xi[j];
            yi[o] = acc;
        }
    }
}

}  // namespace

long FeedForwardNet::param_count() const {
    long n = 0;
    for (const Layer& l : layers) n += static_cast<long>(l.fan_in() + 1) * l.fan_out();
    return n;
}

NetGrads NetGrads::like(const FeedForwardNet& net) {
    NetGrads g;
    g.layers.reserve(net.layers.size());
    for (const Layer& l : net.layers)
        g.layers.push_back({Matrix(l.fan_out(), l.fan_in()), Vec(l.fan_out(), 0.0)});
    return g;
}

void NetGrads::zero() {
    for (LayerGrads& l : layers) {
        l.w.fill(0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

void NetGrads::scale(double s) {
    for (LayerGrads& l : layers) {
        for (double& x : l.w.data) x *= s;
        for (double& x : l.b) x *= s;
    }
}

double NetGrads::squared_norm() const {
    double s = 0.0;
    for (const LayerGrads& l : layers) {
        s += xdiff::squared_norm(l.w);
        s += xdiff::squared_norm(l.b);
    }
    return s;
}

bool NetGrads::finite() const {
    for (const LayerGrads& l : layers)
        if (!all_finite(l.w) || !all_finite(l.b)) return false;
    return true;
}

FeedForwardNet make_net(int input_width, const std::vector<int>& hidden_widths,
                        int output_width, Activation hidden_act, SeededRng& rng) {
    if (input_width <= 0 || output_width <= 0)
        throw std::invalid_argument("make_net: widths must be positive");
    FeedForwardNet net;
    net.input_width = input_width;
    net.output_width = output_width;
    int prev = input_width;
    for (int h : hidden_widths) {
        if (h <= 0) throw std::invalid_argument("make_net: hidden width must be positive");
        Layer l;
        l.w = Matrix(h, prev);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(prev));
        for (double& x : l.w.data) x = rng.normal() * std_dev;
        l.b = Vec(h, 0.0);
        l.act = hidden_act;
        net.layers.push_back(std::move(l));
        prev = h;
    }
    Layer out;
    out.w = Matrix(output_width, prev);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(prev));
    for (double& x : out.w.data) x = rng.normal() * std_dev;
    out.b = Vec(output_width, 0.0);
    out.act = Activation::linear;
    net.layers.push_back(std::move(out));
    return net;
}

Vec net_forward(const FeedForwardNet& net, const Vec& x) {
    if (static_cast<int>(x.size()) != net.input_width)
        throw std::invalid_argument("net_forward: input width mismatch, got " +
                                    std::to_string(x.size()) + " expected " +
                                    std::to_string(net.input_width));
    Matrix X(1, net.input_width);
    X.data.assign(x.begin(), x.end());
    Matrix Y = net_forward_batch(net, X);
    return Vec(Y.data.begin(), Y.data.end());
}

Matrix net_forward_batch(const FeedForwardNet& net, const Matrix& X) {
    if (X.cols != net.input_width)
        throw std::invalid_argument("net_forward_batch: input width mismatch");
    Matrix cur = X;
    for (const Layer& layer : net.layers) {
        Matrix next(cur.rows, layer.fan_out());
        affine_forward(cur, layer, next);
        if (layer.act != Activation::linear)
            for (double& z : next.data) z = act_value(layer.act, z);
        cur = std::move(next);
    }
    return cur;
}

BackwardResult net_backward(const FeedForwardNet& net, const Vec& x, const Vec& upstream_grad) {
    if (static_cast<int>(upstream_grad.size()) != net.output_width)
        throw std::invalid_argument("net_backward: upstream gradient width mismatch");
    Matrix X(1, net.input_width);
    if (static_cast<int>(x.size()) != net.input_width)
        throw std::invalid_argument("net_backward: input width mismatch");
    X.data.assign(x.begin(), x.end());
    Matrix U(1, net.output_width);
    U.data.assign(upstream_grad.begin(), upstream_grad.end());
    BatchBackwardResult r = net_backward_batch(net, X, U);
    return {std::move(r.grads), Vec(r.input_grad.data.begin(), r.input_grad.data.end())};
}

BatchBackwardResult net_backward_batch(const FeedForwardNet& net, const Matrix& X,
                                       const Matrix& upstream_grad) {
    if (X.cols != net.input_width)
        throw std::invalid_argument("net_backward_batch: input width mismatch");
    if (upstream_grad.cols != net.output_width || upstream_grad.rows != X.rows)
        throw std::invalid_argument("net_backward_batch: upstream gradient shape mismatch");

    const int n = X.rows;
    const size_t L = net.layers.size();

    // forward, keeping pre-activations per layer
    std::vector<Matrix> pre(L);        // z = W a + b
    std::vector<Matrix> activ(L + 1);  // a_0 = X, a_{l+1} = act(z_l)
    activ[0] = X;
    for (size_t l = 0; l < L; ++l) {
        const Layer& layer = net.layers[l];
        pre[l] = Matrix(n, layer.fan_out());
        affine_forward(activ[l], layer, pre[l]);
        if (layer.act == Activation::linear) {
            activ[l + 1] = pre[l];
        } else {
            activ[l + 1] = Matrix(n, layer.fan_out());
            for (long i = 0; i < pre[l].size(); ++i)
                activ[l + 1].data[i] = act_value(layer.act, pre[l].data[i]);
        }
    }

    BatchBackwardResult result;
    result.grads = NetGrads::like(net);

    Matrix delta = upstream_grad;  // dL/d(activation of current layer)
    for (size_t li = L; li-- > 0;) {
        const Layer& layer = net.layers[li];
        const int in = layer.fan_in(), out = layer.fan_out();

        // through the activation: delta_z = delta * act'(z)
        if (layer.act != Activation::linear)
            for (long i = 0; i < delta.size(); ++i)
                delta.data[i] *= act_deriv(layer.act, pre[li].data[i]);

        LayerGrads& g = result.grads.layers[li];
        const Matrix& a_in = activ[li];
        for (int i = 0; i < n; ++i) {
            const double* di = delta.row(i);
            const double* ai = a_in.row(i);
            for (int o = 0; o < out; ++o) {
                const double d = di[o];
                if (d == 0.0) continue;
                double* gw = g.w.row(o);
                for (int j = 0; j < in; ++j) gw[j] += d * ai[j];
                g.b[o] += d;
            }
        }

        // propagate: delta_in = delta_z * W
        Matrix delta_in(n, in);
        for (int i = 0; i < n; ++i) {
            const double* di = delta.row(i);
            double* out_row = delta_in.row(i);
            for (int o = 0; o < out; ++o) {
                const double d = di[o];
                if (d == 0.0) continue;
                const double* wo = layer.w.row(o);
                for (int j = 0; j < in; ++j) out_row[j] += d * wo[j];
            }
        }
        delta = std::move(delta_in);
    }
    result.input_grad = std::move(delta);
    return result;
}

Vec step_embedding(int k, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("step_embedding: dim must be positive and even");
    Vec e(static_cast<size_t>(dim));
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        e[2 * i] = std::sin(k * freq);
        e[2 * i + 1] = std::cos(k * freq);
    }
    return e;
}

bool nets_equal(const FeedForwardNet& a, const FeedForwardNet& b) {
    if (a.input_width != b.input_width || a.output_width != b.output_width ||
        a.layers.size() != b.layers.size())
        return false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
        const Layer& la = a.layers[i];
        const Layer& lb = b.layers[i];
        if (la.act != lb.act || !la.w.same_shape(lb.w) || la.b.size() != lb.b.size()) return false;
        if (std::memcmp(la.w.data.data(), lb.w.data.data(), la.w.data.size() * sizeof(double)) != 0)
            return false;
        if (std::memcmp(la.b.data(), lb.b.data(), la.b.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace xdiff

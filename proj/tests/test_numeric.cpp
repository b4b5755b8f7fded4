#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "xdiff/adam.hpp"
#include "xdiff/checkpoint.hpp"
#include "xdiff/errors.hpp"
#include "xdiff/net.hpp"
#include "xdiff/rng.hpp"

using namespace xdiff;

namespace {

/// Independent forward-pass oracle: plain nested loops, no shared code with
/// net_forward_batch's blocked path.
Vec reference_forward(const FeedForwardNet& net, const Vec& x) {
    Vec cur = x;
    for (const Layer& l : net.layers) {
        Vec next(static_cast<size_t>(l.fan_out()), 0.0);
        for (int o = 0; o < l.fan_out(); ++o) {
            double acc = l.b[static_cast<size_t>(o)];
            for (int j = 0; j < l.fan_in(); ++j) acc += l.w.at(o, j) * cur[static_cast<size_t>(j)];
            switch (l.act) {
                case Activation::linear: break;
                case Activation::tanh_act: acc = std::tanh(acc); break;
                case Activation::silu: acc = acc / (1.0 + std::exp(-acc)); break;
            }
            next[static_cast<size_t>(o)] = acc;
        }
        cur = next;
    }
    return cur;
}

double probe_value(const FeedForwardNet& net, const Vec& x, const Vec& upstream) {
    const Vec y = net_forward(net, x);
    double v = 0.0;
    for (size_t i = 0; i < y.size(); ++i) v += upstream[i] * y[i];
    return v;
}

/// Max relative error between analytic gradients and central finite
/// differences of (upstream . output) over every parameter.
double finite_difference_max_rel_err(FeedForwardNet& net, const Vec& x, const Vec& upstream,
                                     double h) {
    const NetGrads analytic = net_backward(net, x, upstream).grads;
    double worst = 0.0;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        for (long i = 0; i < layer.w.size() + static_cast<long>(layer.b.size()); ++i) {
            double* p = i < layer.w.size() ? &layer.w.data[static_cast<size_t>(i)]
                                           : &layer.b[static_cast<size_t>(i - layer.w.size())];
            const double a = i < layer.w.size()
                                 ? analytic.layers[li].w.data[static_cast<size_t>(i)]
                                 : analytic.layers[li].b[static_cast<size_t>(i - layer.w.size())];
            const double saved = *p;
            *p = saved + h;
            const double up = probe_value(net, x, upstream);
            *p = saved - h;
            const double dn = probe_value(net, x, upstream);
            *p = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double scale = std::max({1.0, std::fabs(a), std::fabs(fd)});
            worst = std::max(worst, std::fabs(a - fd) / scale);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("seeded rng: identical seeds give bitwise-identical streams") {
    SeededRng a(7), b(7);
    Matrix ma = normal_sample(a, 13, 5);
    Matrix mb = normal_sample(b, 13, 5);
    REQUIRE(ma.same_shape(mb));
    for (long i = 0; i < ma.size(); ++i) CHECK(ma.data[i] == mb.data[i]);

    SeededRng c(8);
    Matrix mc = normal_sample(c, 13, 5);
    bool any_diff = false;
    for (long i = 0; i < ma.size(); ++i) any_diff |= ma.data[i] != mc.data[i];
    CHECK(any_diff);
}

TEST_CASE("seeded rng: standard-normal moments over 1e6 draws") {
    SeededRng rng(42);
    const int n = 1'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("seeded rng: empty shape leaves the stream untouched") {
    SeededRng rng(3);
    const double before = SeededRng(3).uniform01();
    Matrix empty = normal_sample(rng, 0, 4);
    CHECK(empty.size() == 0);
    CHECK(rng.uniform01() == before);
}

TEST_CASE("seeded rng: uniform_int stays in range and covers it") {
    SeededRng rng(11);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 20000; ++i) {
        const int v = rng.uniform_int(10);
        REQUIRE(v >= 0);
        REQUIRE(v < 10);
        counts[static_cast<size_t>(v)]++;
    }
    for (int c : counts) CHECK(c > 1600);  // ~2000 expected
}

TEST_CASE("seeded rng: forks are independent of consumption position") {
    SeededRng a(99);
    const uint64_t early = a.fork(5).seed();
    (void)a.normal();
    (void)a.normal();
    CHECK(a.fork(5).seed() == early);
    CHECK(a.fork(6).seed() != early);
}

TEST_CASE("net forward: all-zero weights yield the bias") {
    SeededRng rng(1);
    FeedForwardNet net = make_net(3, {}, 2, Activation::silu, rng);
    net.layers[0].w.fill(0.0);
    net.layers[0].b = {0.25, -1.5};
    const Vec y = net_forward(net, {7.0, -2.0, 3.0});
    CHECK(y[0] == doctest::Approx(0.25));
    CHECK(y[1] == doctest::Approx(-1.5));
}

TEST_CASE("net forward: identity single layer") {
    SeededRng rng(1);
    FeedForwardNet net = make_net(4, {}, 4, Activation::silu, rng);
    net.layers[0].w.fill(0.0);
    for (int i = 0; i < 4; ++i) net.layers[0].w.at(i, i) = 1.0;
    const Vec x{0.5, -0.25, 2.0, 0.0};
    const Vec y = net_forward(net, x);
    for (int i = 0; i < 4; ++i) CHECK(y[static_cast<size_t>(i)] == x[static_cast<size_t>(i)]);
}

TEST_CASE("net forward: matches the independent matrix-product oracle") {
    SeededRng rng(17);
    for (Activation act : {Activation::linear, Activation::tanh_act, Activation::silu}) {
        FeedForwardNet net = make_net(6, {9, 7}, 4, act, rng);
        for (int probe = 0; probe < 5; ++probe) {
            Vec x = normal_sample(rng, 6);
            const Vec got = net_forward(net, x);
            const Vec want = reference_forward(net, x);
            for (size_t i = 0; i < want.size(); ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("net forward: input width mismatch throws") {
    SeededRng rng(2);
    FeedForwardNet net = make_net(5, {4}, 2, Activation::silu, rng);
    CHECK_THROWS_AS(net_forward(net, Vec(3, 0.0)), std::invalid_argument);
}

TEST_CASE("net backward: linear net, basis upstream picks out the input row") {
    SeededRng rng(5);
    FeedForwardNet net = make_net(4, {}, 3, Activation::silu, rng);
    const Vec x{1.0, -2.0, 0.5, 3.0};
    Vec upstream{0.0, 1.0, 0.0};  // e_1
    const BackwardResult r = net_backward(net, x, upstream);
    for (int j = 0; j < 4; ++j) {
        CHECK(r.grads.layers[0].w.at(1, j) == doctest::Approx(x[static_cast<size_t>(j)]));
        CHECK(r.grads.layers[0].w.at(0, j) == 0.0);
        CHECK(r.grads.layers[0].w.at(2, j) == 0.0);
    }
    CHECK(r.grads.layers[0].b[1] == 1.0);
}

TEST_CASE("net backward: zero upstream gradient zeroes everything") {
    SeededRng rng(6);
    FeedForwardNet net = make_net(5, {8, 8}, 3, Activation::silu, rng);
    const Vec x = normal_sample(rng, 5);
    const BackwardResult r = net_backward(net, x, Vec(3, 0.0));
    CHECK(r.grads.squared_norm() == 0.0);
    CHECK(squared_norm(r.input_grad) == 0.0);
}

TEST_CASE("net backward: finite-difference agreement per activation") {
    SeededRng rng(23);
    for (Activation act : {Activation::linear, Activation::tanh_act, Activation::silu}) {
        for (int trial = 0; trial < 10; ++trial) {
            FeedForwardNet net = make_net(5, {8, 6}, 3, act, rng);
            Vec x = normal_sample(rng, 5);
            Vec upstream = normal_sample(rng, 3);
            CHECK(finite_difference_max_rel_err(net, x, upstream, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("net backward: input gradient matches finite differences") {
    SeededRng rng(29);
    FeedForwardNet net = make_net(6, {10}, 4, Activation::silu, rng);
    Vec x = normal_sample(rng, 6);
    Vec upstream = normal_sample(rng, 4);
    const BackwardResult r = net_backward(net, x, upstream);
    const double h = 1e-5;
    for (size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (probe_value(net, xp, upstream) - probe_value(net, xm, upstream)) /
                          (2.0 * h);
        CHECK(r.input_grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("batched forward/backward agree with the single-sample path") {
    SeededRng rng(31);
    FeedForwardNet net = make_net(7, {9}, 5, Activation::silu, rng);
    Matrix X = normal_sample(rng, 6, 7);
    Matrix U = normal_sample(rng, 6, 5);
    const Matrix Y = net_forward_batch(net, X);
    const BatchBackwardResult batch = net_backward_batch(net, X, U);

    NetGrads sum = NetGrads::like(net);
    for (int i = 0; i < 6; ++i) {
        Vec xi(X.row(i), X.row(i) + 7);
        Vec ui(U.row(i), U.row(i) + 5);
        const Vec yi = net_forward(net, xi);
        for (int j = 0; j < 5; ++j) CHECK(Y.at(i, j) == doctest::Approx(yi[static_cast<size_t>(j)]));
        const BackwardResult r = net_backward(net, xi, ui);
        for (size_t li = 0; li < sum.layers.size(); ++li) {
            for (long w = 0; w < sum.layers[li].w.size(); ++w)
                sum.layers[li].w.data[static_cast<size_t>(w)] +=
                    r.grads.layers[li].w.data[static_cast<size_t>(w)];
            for (size_t b = 0; b < sum.layers[li].b.size(); ++b)
                sum.layers[li].b[b] += r.grads.layers[li].b[b];
        }
    }
    for (size_t li = 0; li < sum.layers.size(); ++li) {
        for (long w = 0; w < sum.layers[li].w.size(); ++w)
            CHECK(batch.grads.layers[li].w.data[static_cast<size_t>(w)] ==
                  doctest::Approx(sum.layers[li].w.data[static_cast<size_t>(w)]).epsilon(1e-10));
    }
}

TEST_CASE("adam: first step matches the hand-computed bias-corrected update") {
    SeededRng rng(3);
    FeedForwardNet net = make_net(1, {}, 1, Activation::silu, rng);
    net.layers[0].w.at(0, 0) = 0.7;
    net.layers[0].b[0] = -0.2;
    AdamState state = AdamState::like(net);
    NetGrads g = NetGrads::like(net);
    const double grad = 0.35;
    g.layers[0].w.at(0, 0) = grad;
    const double lr = 1e-3;
    adam_step(state, net, g, lr);

    // first step: m_hat = g, v_hat = g^2 -> delta = lr * g / (|g| + eps)
    const double expected = 0.7 - lr * grad / (std::fabs(grad) + 1e-8);
    CHECK(net.layers[0].w.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::fabs(0.7 - net.layers[0].w.at(0, 0)) == doctest::Approx(lr).epsilon(1e-6));
    CHECK(state.step_count == 1);
}

TEST_CASE("adam: zero gradients leave parameters unchanged, counter advances") {
    SeededRng rng(4);
    FeedForwardNet net = make_net(3, {4}, 2, Activation::silu, rng);
    FeedForwardNet before = net;
    AdamState state = AdamState::like(net);
    NetGrads g = NetGrads::like(net);
    adam_step(state, net, g, 1e-3);
    CHECK(nets_equal(net, before));
    CHECK(state.step_count == 1);
}

TEST_CASE("adam: identical runs from the same seed are bitwise identical") {
    auto train = [] {
        SeededRng rng(77);
        FeedForwardNet net = make_net(4, {6}, 2, Activation::silu, rng);
        AdamState state = AdamState::like(net);
        for (int step = 0; step < 50; ++step) {
            Vec x = normal_sample(rng, 4);
            Vec u = normal_sample(rng, 2);
            NetGrads g = net_backward(net, x, u).grads;
            clip_global_norm(g, 5.0);
            adam_step(state, net, g, 1e-3);
        }
        return net;
    };
    CHECK(nets_equal(train(), train()));
}

TEST_CASE("adam: non-finite gradient fails with diagnostics") {
    SeededRng rng(5);
    FeedForwardNet net = make_net(2, {}, 1, Activation::silu, rng);
    AdamState state = AdamState::like(net);
    NetGrads g = NetGrads::like(net);
    g.layers[0].w.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(state, net, g, 1e-3), std::runtime_error);
}

TEST_CASE("clip_global_norm caps the norm and reports the pre-clip value") {
    SeededRng rng(6);
    FeedForwardNet net = make_net(4, {16}, 4, Activation::silu, rng);
    NetGrads g = NetGrads::like(net);
    for (auto& l : g.layers) {
        l.w.fill(3.0);
        std::fill(l.b.begin(), l.b.end(), 3.0);
    }
    const double before = std::sqrt(g.squared_norm());
    const double reported = clip_global_norm(g, 5.0);
    CHECK(reported == doctest::Approx(before));
    CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(5.0).epsilon(1e-12));

    NetGrads small = NetGrads::like(net);
    small.layers[0].w.at(0, 0) = 0.5;
    clip_global_norm(small, 5.0);
    CHECK(small.layers[0].w.at(0, 0) == 0.5);
}

TEST_CASE("checkpoint: save/load round-trip is bitwise exact") {
    SeededRng rng(8);
    FeedForwardNet net = make_net(5, {7, 6}, 3, Activation::tanh_act, rng);
    const std::string path = "test_net_checkpoint.bin";
    save_net(net, path);
    const FeedForwardNet loaded = load_net(path);
    CHECK(nets_equal(net, loaded));
    CHECK(loaded.layers[0].act == Activation::tanh_act);
    CHECK(loaded.layers.back().act == Activation::linear);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncated and corrupt files are rejected") {
    SeededRng rng(9);
    FeedForwardNet net = make_net(3, {4}, 2, Activation::silu, rng);
    const std::string path = "test_net_truncated.bin";
    save_net(net, path);
    const auto full = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full / 2);
    CHECK_THROWS_AS(load_net(path), IoError);

    std::ofstream bad(path, std::ios::binary | std::ios::trunc);
    bad << "not a checkpoint at all";
    bad.close();
    CHECK_THROWS_AS(load_net(path), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("param_count matches sum of (fan_in + 1) * fan_out") {
    SeededRng rng(10);
    FeedForwardNet net = make_net(6, {9, 5}, 2, Activation::silu, rng);
    CHECK(net.param_count() == (6 + 1) * 9 + (9 + 1) * 5 + (5 + 1) * 2);
}

TEST_CASE("step embedding has unit-bounded entries and distinguishes steps") {
    const Vec a = step_embedding(3, 16);
    const Vec b = step_embedding(4, 16);
    CHECK(a.size() == 16);
    for (double v : a) CHECK(std::fabs(v) <= 1.0);
    double diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i) diff += std::fabs(a[i] - b[i]);
    CHECK(diff > 0.1);
}

#include "xdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace xdiff {

ActionChunk forward_noise(const NoiseSchedule& s, const ActionChunk& a0, int k,
                          const ActionChunk& eps) {
    if (k < 0 || k > s.steps)
        throw std::out_of_range("forward_noise: k = " + std::to_string(k) + " outside [0, " +
                                std::to_string(s.steps) + "]");
    if (!a0.same_shape(eps)) throw std::invalid_argument("forward_noise: eps shape mismatch");
    const double ab = s.abar(k);
    const double c_sig = std::sqrt(ab);
    const double c_noise = std::sqrt(1.0 - ab);
    ActionChunk out(a0.rows, a0.cols);
    for (long i = 0; i < a0.size(); ++i)
        out.data[i] = c_sig * a0.data[i] + c_noise * eps.data[i];
    return out;
}

ActionChunk forward_kernel_step(const NoiseSchedule& s, const ActionChunk& ak, int k,
                                const ActionChunk& eps) {
    if (k < 0 || k >= s.steps)
        throw std::out_of_range("forward_kernel_step: k = " + std::to_string(k) +
                                " outside [0, " + std::to_string(s.steps - 1) + "]");
    if (!ak.same_shape(eps))
        throw std::invalid_argument("forward_kernel_step: eps shape mismatch");
    const double beta = s.beta(k + 1);
    const double c_sig = std::sqrt(1.0 - beta);
    const double c_noise = std::sqrt(beta);
    ActionChunk out(ak.rows, ak.cols);
    for (long i = 0; i < ak.size(); ++i)
        out.data[i] = c_sig * ak.data[i] + c_noise * eps.data[i];
    return out;
}

Vec assemble_input(int k, const Matrix& chunk, const Vec& state, int embed_dim) {
    Vec emb = step_embedding(k, embed_dim);
    Vec x;
    x.reserve(emb.size() + chunk.data.size() + state.size());
    x.insert(x.end(), emb.begin(), emb.end());
    x.insert(x.end(), chunk.data.begin(), chunk.data.end());
    x.insert(x.end(), state.begin(), state.end());
    return x;
}

DenoiserFn net_denoiser(const FeedForwardNet& net, int horizon, int action_dim, int embed_dim) {
    return [&net, horizon, action_dim, embed_dim](int k, const Matrix& noisy,
                                                  const Vec& state) -> Matrix {
        Vec out = net_forward(net, assemble_input(k, noisy, state, embed_dim));
        return unflatten(out, horizon, action_dim);
    };
}

EpsLossResult eps_loss(const FeedForwardNet& denoiser, const NoiseSchedule& s,
                       const ActionChunk& a0, const Vec& state, int k, SeededRng& rng,
                       int embed_dim) {
    if (k < 1 || k > s.steps)
        throw std::out_of_range("eps_loss: k outside [1, K]");
    EpsLossResult r;
    r.eps = normal_sample(rng, a0.rows, a0.cols);
    const ActionChunk ak = forward_noise(s, a0, k, r.eps);
    const Vec x = assemble_input(k, ak, state, embed_dim);
    const Vec pred = net_forward(denoiser, x);
    if (static_cast<long>(pred.size()) != a0.size())
        throw std::invalid_argument("eps_loss: denoiser output width != chunk size");

    Vec upstream(pred.size());
    double loss = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - r.eps.data[i];
        loss += d * d;
        upstream[i] = 2.0 * d;
    }
    if (!std::isfinite(loss)) throw std::runtime_error("eps_loss: non-finite activations");
    r.loss = loss;
    r.grads = net_backward(denoiser, x, upstream).grads;
    return r;
}

std::vector<int> inference_step_plan(int K, int inference_steps) {
    if (inference_steps < 1 || inference_steps > K)
        throw std::invalid_argument("inference_step_plan: need 1 <= inference_steps <= K");
    std::vector<int> ks(static_cast<size_t>(inference_steps));
    for (int i = 0; i < inference_steps; ++i) {
        // ceil((n - i) * K / n): evenly strided, starts at K, stays >= 1
        const long num = static_cast<long>(inference_steps - i) * K;
        ks[static_cast<size_t>(i)] = static_cast<int>((num + inference_steps - 1) / inference_steps);
    }
    return ks;
}

ActionChunk ddpm_sample(const DenoiserFn& denoiser, const NoiseSchedule& s, const Vec& state,
                        int horizon, int action_dim, int inference_steps, SeededRng& rng) {
    const std::vector<int> plan = inference_step_plan(s.steps, inference_steps);
    Matrix x = normal_sample(rng, horizon, action_dim);
    for (size_t i = 0; i < plan.size(); ++i) {
        const int k = plan[i];
        const int k_prev = (i + 1 < plan.size()) ? plan[i + 1] : 0;
        const double ab = s.abar(k);
        const double ab_prev = s.abar(k_prev);
        const double alpha_step = ab / ab_prev;         // product of alphas over the stride
        const double beta_step = 1.0 - alpha_step;

        const Matrix eps_hat = denoiser(k, x, state);
        if (!eps_hat.same_shape(x))
            throw std::invalid_argument("ddpm_sample: denoiser output shape mismatch");

        // x0_hat = (x - sqrt(1-abar_k) eps_hat) / sqrt(abar_k); posterior mean
        // mu = [sqrt(alpha_step)(1-abar_prev) x + sqrt(abar_prev) beta_step x0_hat] / (1-abar_k)
        const double inv_sqrt_ab = 1.0 / std::sqrt(ab);
        const double c_noise = std::sqrt(1.0 - ab);
        const double w_x = std::sqrt(alpha_step) * (1.0 - ab_prev) / (1.0 - ab);
        const double w_x0 = std::sqrt(ab_prev) * beta_step / (1.0 - ab);
        const bool final_step = (k_prev == 0);
        const double sigma = final_step ? 0.0 : std::sqrt(beta_step);

        for (long j = 0; j < x.size(); ++j) {
            const double x0_hat = (x.data[j] - c_noise * eps_hat.data[j]) * inv_sqrt_ab;
            double v = w_x * x.data[j] + w_x0 * x0_hat;
            if (!final_step) v += sigma * rng.normal();
            x.data[j] = v;
        }
        if (!all_finite(x))
            throw std::runtime_error("ddpm_sample: non-finite intermediate at step k = " +
                                     std::to_string(k));
    }
    return x;
}

}  // namespace xdiff

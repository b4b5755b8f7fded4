#pragma once

#include <functional>

#include "xdiff/net.hpp"
#include "xdiff/rng.hpp"
#include "xdiff/schedule.hpp"

namespace xdiff {

/// Closed-form marginal of the forward process:
///   A^k = sqrt(abar_k) A^0 + sqrt(1 - abar_k) eps,  k in [0..K].
/// k = 0 returns A0 exactly.
ActionChunk forward_noise(const NoiseSchedule& s, const ActionChunk& a0, int k,
                          const ActionChunk& eps);

/// One forward kernel step q(A^{k+1} | A^k) = N(sqrt(1-beta_{k+1}) A^k, beta_{k+1} I).
/// Takes the current step index k in [0..K-1].
ActionChunk forward_kernel_step(const NoiseSchedule& s, const ActionChunk& ak, int k,
                                const ActionChunk& eps);

/// Epsilon-prediction denoiser interface: given (k, noisy chunk, state),
/// return the predicted injected noise.
using DenoiserFn = std::function<Matrix(int k, const Matrix& noisy, const Vec& state)>;

inline constexpr int kStepEmbedDim = 16;

/// Assemble the denoiser/classifier input row: [step embedding | flattened
/// chunk | state].
Vec assemble_input(int k, const Matrix& chunk, const Vec& state, int embed_dim = kStepEmbedDim);

/// Denoiser backed by a FeedForwardNet over assemble_input(...).
DenoiserFn net_denoiser(const FeedForwardNet& net, int horizon, int action_dim,
                        int embed_dim = kStepEmbedDim);

struct EpsLossResult {
    double loss = 0.0;   // ||eps_hat - eps||^2 (sum over entries)
    NetGrads grads;
    ActionChunk eps;     // the injected noise (useful for tests)
};

/// Sample eps, form A^k, and return the squared-error epsilon loss with
/// parameter gradients. k in [1..K].
EpsLossResult eps_loss(const FeedForwardNet& denoiser, const NoiseSchedule& s,
                       const ActionChunk& a0, const Vec& state, int k, SeededRng& rng,
                       int embed_dim = kStepEmbedDim);

/// Visited step indices for strided inference: an evenly strided decreasing
/// subsequence of [K..1] of length inference_steps (the first entry is K).
std::vector<int> inference_step_plan(int K, int inference_steps);

/// Ancestral sampler. Starts from A^K ~ N(0, I), applies the epsilon-
/// parameterized posterior-mean update at every visited step with fresh noise
/// (variance 1 - abar_k/abar_prev) except at the final step, which is
/// deterministic. Returns the A^0 estimate. Throws on non-finite intermediates.
ActionChunk ddpm_sample(const DenoiserFn& denoiser, const NoiseSchedule& s, const Vec& state,
                        int horizon, int action_dim, int inference_steps, SeededRng& rng);

}  // namespace xdiff

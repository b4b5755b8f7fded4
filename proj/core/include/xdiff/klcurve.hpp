#pragma once

#include <string>
#include <vector>

#include "xdiff/rng.hpp"
#include "xdiff/schedule.hpp"
#include "xdiff/trajectory.hpp"

namespace xdiff {

/// Distribution-overlap diagnostics: KL(human^k || robot^k) per noise level,
/// estimated by diagonal-Gaussian fits to the flattened noised chunks, plus
/// the classifier probability-gap curve when available.
struct OverlapCurve {
    std::vector<int> ks;
    Vec kl;        // nats, clamped at 0
    Vec prob_gap;  // mean_robot - mean_human classifier probability (optional)
    Vec se;        // standard error of prob_gap
    std::string estimator = "gaussian_fit";
    int clamp_count = 0;  // negative KL values clamped to 0
    int floor_count = 0;  // degenerate variances floored
    double spearman = 0.0;  // rank correlation between kl and prob_gap trends
};

/// Closed-form KL between diagonal-Gaussian fits of two flattened sample
/// sets (each row one sample). Variances are floored at 1e-8; `floor_count`
/// is incremented per floored dimension when provided.
double diag_gaussian_kl(const std::vector<Vec>& from_samples,
                        const std::vector<Vec>& to_samples, int* floor_count = nullptr);

/// KL(p_H^k || p_R^k) over a grid of noise levels. Each chunk is noised once
/// per grid point; noise streams are keyed by (k, chunk index) from the rng
/// seed, so identical chunk sets under the same seed receive identical noise.
OverlapCurve kl_curve_chunks(const std::vector<ActionChunk>& human_chunks,
                             const std::vector<ActionChunk>& robot_chunks,
                             const NoiseSchedule& schedule, const std::vector<int>& ks,
                             const SeededRng& rng);

/// Dataset wrapper over kl_curve_chunks (normalized chunks, horizon from cfg).
OverlapCurve kl_curve(const DemoDataset& d_human, const DemoDataset& d_robot,
                      const NoiseSchedule& schedule, const std::vector<int>& ks, int horizon,
                      const SeededRng& rng);

/// Spearman rank correlation between two sequences (ties averaged).
double spearman_correlation(const Vec& a, const Vec& b);

}  // namespace xdiff

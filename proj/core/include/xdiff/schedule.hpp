#pragma once

#include <string>
#include <vector>

#include "xdiff/matrix.hpp"

namespace xdiff {

enum class ScheduleKind { linear = 0 };

const char* schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from_name(const std::string& name);

/// Variance-preserving noise schedule over K steps.
/// beta is 1-based conceptually: beta(k) for k in [1..K]; alpha_bar(k) for
/// k in [0..K] with alpha_bar(0) = 1 and alpha_bar strictly decreasing.
struct NoiseSchedule {
    int steps = 0;  // K
    ScheduleKind kind = ScheduleKind::linear;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> beta_;       // beta_[k-1] = beta(k)
    std::vector<double> alpha_bar_;  // alpha_bar_[k], size K+1

    double beta(int k) const { return beta_[static_cast<size_t>(k) - 1]; }    // k in [1..K]
    double alpha(int k) const { return 1.0 - beta(k); }
    double abar(int k) const { return alpha_bar_[static_cast<size_t>(k)]; }   // k in [0..K]

    /// Terminal marginal close enough to the standard-normal prior for
    /// training/sampling to start from N(0, I).
    bool terminal_near_prior() const { return abar(steps) < 0.01; }

    /// Signal-to-noise ratio sqrt(abar/(1-abar)) at step k (k >= 1).
    double snr(int k) const;
};

/// Construct a schedule; validates 0 < beta_min <= beta_max < 1 and K >= 1.
NoiseSchedule build_schedule(int steps, ScheduleKind kind, double beta_min, double beta_max);

/// As build_schedule, but additionally requires the terminal marginal to be
/// near the prior (abar(K) < 0.01), which actual training runs depend on.
NoiseSchedule make_training_schedule(int steps, ScheduleKind kind, double beta_min,
                                     double beta_max);

}  // namespace xdiff

#include "xdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "xdiff/errors.hpp"

namespace xdiff {

const char* schedule_kind_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::linear: return "linear";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
    if (name == "linear") return ScheduleKind::linear;
    throw ConfigError("unknown schedule kind: " + name);
}

double NoiseSchedule::snr(int k) const {
    const double ab = abar(k);
    return std::sqrt(ab / (1.0 - ab));
}

NoiseSchedule build_schedule(int steps, ScheduleKind kind, double beta_min, double beta_max) {
    if (steps < 1) throw std::invalid_argument("build_schedule: steps must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_min <= beta_max < 1");

    NoiseSchedule s;
    s.steps = steps;
    s.kind = kind;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta_.resize(static_cast<size_t>(steps));
    for (int k = 1; k <= steps; ++k) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(k - 1) / (steps - 1);
        s.beta_[static_cast<size_t>(k) - 1] = beta_min + t * (beta_max - beta_min);
    }
    s.alpha_bar_.resize(static_cast<size_t>(steps) + 1);
    s.alpha_bar_[0] = 1.0;
    for (int k = 1; k <= steps; ++k)
        s.alpha_bar_[static_cast<size_t>(k)] =
            s.alpha_bar_[static_cast<size_t>(k) - 1] * (1.0 - s.beta(k));
    return s;
}

NoiseSchedule make_training_schedule(int steps, ScheduleKind kind, double beta_min,
                                     double beta_max) {
    NoiseSchedule s = build_schedule(steps, kind, beta_min, beta_max);
    if (!s.terminal_near_prior())
        throw ConfigError("schedule terminal alpha_bar(K) = " + std::to_string(s.abar(steps)) +
                          " >= 0.01; raise beta_max or K so the terminal marginal is near N(0, I)");
    return s;
}

}  // namespace xdiff

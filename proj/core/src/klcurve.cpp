#include "xdiff/klcurve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace xdiff {

namespace {

constexpr double kVarFloor = 1e-8;

struct DiagFit {
    Vec mean, var;
};

DiagFit fit_diag(const std::vector<Vec>& samples, int* floor_count) {
    const size_t n = samples.size();
    const size_t d = samples.front().size();
    DiagFit f;
    f.mean.assign(d, 0.0);
    f.var.assign(d, 0.0);
    for (const Vec& s : samples)
        for (size_t j = 0; j < d; ++j) f.mean[j] += s[j];
    for (double& m : f.mean) m /= static_cast<double>(n);
    for (const Vec& s : samples)
        for (size_t j = 0; j < d; ++j) {
            const double dd = s[j] - f.mean[j];
            f.var[j] += dd * dd;
        }
    for (double& v : f.var) {
        v /= static_cast<double>(n > 1 ? n - 1 : 1);
        if (v < kVarFloor) {
            v = kVarFloor;
            if (floor_count) ++*floor_count;
        }
    }
    return f;
}

}  // namespace

double diag_gaussian_kl(const std::vector<Vec>& from_samples,
                        const std::vector<Vec>& to_samples, int* floor_count) {
    if (from_samples.empty() || to_samples.empty())
        throw std::invalid_argument("diag_gaussian_kl: empty sample set");
    const DiagFit h = fit_diag(from_samples, floor_count);
    const DiagFit r = fit_diag(to_samples, floor_count);
    double kl = 0.0;
    for (size_t j = 0; j < h.mean.size(); ++j) {
        const double dm = h.mean[j] - r.mean[j];
        kl += 0.5 * std::log(r.var[j] / h.var[j]) +
              (h.var[j] + dm * dm) / (2.0 * r.var[j]) - 0.5;
    }
    return kl;
}

OverlapCurve kl_curve_chunks(const std::vector<ActionChunk>& human_chunks,
                             const std::vector<ActionChunk>& robot_chunks,
                             const NoiseSchedule& schedule, const std::vector<int>& ks,
                             const SeededRng& rng) {
    if (human_chunks.empty() || robot_chunks.empty())
        throw std::invalid_argument("kl_curve: both chunk sets must be nonempty");
    OverlapCurve curve;
    curve.ks = ks;
    curve.kl.reserve(ks.size());

    // noise stream keyed by (k, chunk index): identical sets + seed => KL = 0
    auto noised = [&](const std::vector<ActionChunk>& chunks, int k) {
        std::vector<Vec> out;
        out.reserve(chunks.size());
        const double c_sig = std::sqrt(schedule.abar(k));
        const double c_noise = std::sqrt(1.0 - schedule.abar(k));
        for (size_t i = 0; i < chunks.size(); ++i) {
            SeededRng r = rng.fork(static_cast<uint64_t>(k)).fork(i);
            Vec row(chunks[i].data.size());
            for (size_t j = 0; j < row.size(); ++j)
                row[j] = c_sig * chunks[i].data[j] + c_noise * r.normal();
            out.push_back(std::move(row));
        }
        return out;
    };

    for (int k : ks) {
        if (k < 0 || k > schedule.steps)
            throw std::out_of_range("kl_curve: grid point outside [0, K]");
        const std::vector<Vec> h = noised(human_chunks, k);
        const std::vector<Vec> r = noised(robot_chunks, k);
        double kl = diag_gaussian_kl(h, r, &curve.floor_count);
        if (kl < 0.0) {
            kl = 0.0;
            ++curve.clamp_count;
        }
        curve.kl.push_back(kl);
    }
    return curve;
}

OverlapCurve kl_curve(const DemoDataset& d_human, const DemoDataset& d_robot,
                      const NoiseSchedule& schedule, const std::vector<int>& ks, int horizon,
                      const SeededRng& rng) {
    const ChunkCache h = build_chunk_cache(d_human, Split::all, horizon);
    const ChunkCache r = build_chunk_cache(d_robot, Split::all, horizon);
    return kl_curve_chunks(h.chunks, r.chunks, schedule, ks, rng);
}

double spearman_correlation(const Vec& a, const Vec& b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    auto ranks = [](const Vec& v) {
        const size_t n = v.size();
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t i, size_t j) { return v[i] < v[j]; });
        Vec rank(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0;
            for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const Vec ra = ranks(a), rb = ranks(b);
    const double ma = mean_of(ra), mb = mean_of(rb);
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

}  // namespace xdiff

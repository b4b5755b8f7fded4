#include "xdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "xdiff/adam.hpp"
#include "xdiff/checkpoint.hpp"
#include "xdiff/errors.hpp"

namespace xdiff {

using nlohmann::json;

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) without overflow
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Rows [embed(k) | noised chunk | state] for each requested (k, draw).
/// k = 0 contributes a single clean row.
struct CurveBatch {
    Matrix X;
    std::vector<int> row_k;  // k per row
};

CurveBatch build_curve_batch(const ClassifierModel& model, const NoiseSchedule& s,
                             const ActionChunk& chunk_norm, const Vec& state_norm,
                             const std::vector<int>& ks, int n_draws, SeededRng& rng) {
    CurveBatch b;
    int rows = 0;
    for (int k : ks) rows += k == 0 ? 1 : n_draws;
    b.X = Matrix(rows, model.input_width());
    b.row_k.reserve(static_cast<size_t>(rows));
    int r = 0;
    for (int k : ks) {
        const int reps = k == 0 ? 1 : n_draws;
        const Vec emb = step_embedding(k, model.embed_dim);
        const double c_sig = std::sqrt(s.abar(k));
        const double c_noise = std::sqrt(1.0 - s.abar(k));
        for (int d = 0; d < reps; ++d, ++r) {
            double* row = b.X.row(r);
            std::copy(emb.begin(), emb.end(), row);
            double* chunk_dst = row + model.embed_dim;
            if (k == 0) {
                std::copy(chunk_norm.data.begin(), chunk_norm.data.end(), chunk_dst);
            } else {
                for (long i = 0; i < chunk_norm.size(); ++i)
                    chunk_dst[i] = c_sig * chunk_norm.data[i] + c_noise * rng.normal();
            }
            std::copy(state_norm.begin(), state_norm.end(),
                      chunk_dst + chunk_norm.size());
            b.row_k.push_back(k);
        }
    }
    return b;
}

/// Mean sigmoid(logit) per requested k, in the order of `ks`.
Vec mean_probability(const ClassifierModel& model, const NoiseSchedule& s,
                     const ActionChunk& chunk_norm, const Vec& state_norm,
                     const std::vector<int>& ks, int n_draws, SeededRng& rng) {
    const CurveBatch b = build_curve_batch(model, s, chunk_norm, state_norm, ks, n_draws, rng);
    const Matrix z = net_forward_batch(model.net, b.X);
    Vec out(ks.size(), 0.0);
    size_t row = 0;
    for (size_t i = 0; i < ks.size(); ++i) {
        const int reps = ks[i] == 0 ? 1 : n_draws;
        double acc = 0.0;
        for (int d = 0; d < reps; ++d, ++row) acc += sigmoid(z.data[row]);
        out[i] = acc / reps;
    }
    return out;
}

std::vector<int> full_grid(int K) {
    std::vector<int> ks(static_cast<size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) ks[static_cast<size_t>(k)] = k;
    return ks;
}

}  // namespace

ClassifierModel train_classifier(const DemoDataset& d_robot, const DemoDataset& d_human,
                                 const NoiseSchedule& schedule, const ClassifierConfig& cfg,
                                 ClassifierTrace* trace) {
    if (d_robot.trajectories.empty() || d_human.trajectories.empty())
        throw std::invalid_argument("train_classifier: both datasets must be nonempty");
    if (!(d_robot.norm == d_human.norm))
        throw std::invalid_argument("train_classifier: datasets must share one normalizer");

    const int da = d_robot.task.action_dim();
    const int ds_width = d_robot.task.state_dim();
    const int S = cfg.horizon;
    const int K = schedule.steps;

    ClassifierModel model;
    model.horizon = S;
    model.action_dim = da;
    model.state_dim = ds_width;
    model.norm = d_robot.norm;

    SeededRng rng(cfg.seed);
    std::vector<int> widths(static_cast<size_t>(cfg.hidden_layers), cfg.hidden_width);
    model.net = make_net(model.input_width(), widths, 1, cfg.activation, rng);

    // raw (unnormalized) chunks: SE(2) augmentation happens in workspace
    // coordinates, then the result is normalized like any other input
    struct RawCache {
        std::vector<ActionChunk> chunks;
        std::vector<Vec> states;
        size_t size() const { return chunks.size(); }
    };
    auto build_raw = [S](const DemoDataset& ds) {
        RawCache c;
        for (const ChunkRef& r : chunk_refs(ds, Split::train)) {
            const Trajectory& t = ds.trajectories[static_cast<size_t>(r.traj)];
            c.chunks.push_back(make_chunk(t, r.chunk, S));
            c.states.push_back(t.states[static_cast<size_t>(r.chunk)]);
        }
        return c;
    };
    const RawCache robot_cache = build_raw(d_robot);
    const RawCache human_cache = build_raw(d_human);
    if (robot_cache.size() == 0 || human_cache.size() == 0)
        throw std::invalid_argument("train_classifier: empty training split");

    // cache step embeddings, k in [1..K]
    std::vector<Vec> emb(static_cast<size_t>(K) + 1);
    for (int k = 1; k <= K; ++k) emb[static_cast<size_t>(k)] = step_embedding(k, model.embed_dim);

    AdamState adam = AdamState::like(model.net);
    ClassifierTrace local_trace;
    ClassifierTrace& tr = trace ? *trace : local_trace;

    Matrix X(cfg.batch, model.input_width());
    Vec labels(static_cast<size_t>(cfg.batch));
    const long chunk_len = static_cast<long>(S) * da;
    const NormStats& nm = model.norm;

    for (int step = 0; step < cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch; ++b) {
            const bool robot = rng.uniform01() < 0.5;  // equal-probability sampling
            const RawCache& cache = robot ? robot_cache : human_cache;
            (robot ? tr.robot_samples : tr.human_samples) += 1;
            const int idx = rng.uniform_int(static_cast<int>(cache.size()));
            const int k = 1 + rng.uniform_int(K);
            const ActionChunk& a0 = cache.chunks[static_cast<size_t>(idx)];
            const Vec& st = cache.states[static_cast<size_t>(idx)];
            const double c_sig = std::sqrt(schedule.abar(k));
            const double c_noise = std::sqrt(1.0 - schedule.abar(k));

            // SE(2) scene augmentation: rotate about the workspace center and
            // translate. Speeds, roughness, and wrist angles are preserved, so
            // execution style is the only signal that survives; absolute
            // episode geometry cannot be memorized.
            double cphi = 1.0, sphi = 0.0, dx = 0.0, dy = 0.0;
            if (cfg.augment_shift > 0.0) {
                const double phi = (rng.uniform01() * 2.0 - 1.0) * M_PI;
                cphi = std::cos(phi);
                sphi = std::sin(phi);
                dx = (rng.uniform01() * 2.0 - 1.0) * cfg.augment_shift;
                dy = (rng.uniform01() * 2.0 - 1.0) * cfg.augment_shift;
            }
            auto warp_point = [&](double x, double y, double& ox, double& oy) {
                const double rx = x - 0.5, ry = y - 0.5;
                ox = 0.5 + cphi * rx - sphi * ry + dx;
                oy = 0.5 + sphi * rx + cphi * ry + dy;
            };

            double* row = X.row(b);
            const Vec& e = emb[static_cast<size_t>(k)];
            std::copy(e.begin(), e.end(), row);
            double* chunk_dst = row + model.embed_dim;
            for (int r = 0; r < S; ++r) {
                double ax, ay;
                warp_point(a0.at(r, 0), a0.at(r, 1), ax, ay);
                const double vals[4] = {(ax - nm.action_mean[0]) / nm.action_std[0],
                                        (ay - nm.action_mean[1]) / nm.action_std[1],
                                        (a0.at(r, 2) - nm.action_mean[2]) / nm.action_std[2],
                                        (a0.at(r, 3) - nm.action_mean[3]) / nm.action_std[3]};
                for (int c = 0; c < da; ++c)
                    chunk_dst[static_cast<long>(r) * da + c] =
                        c_sig * vals[c] + c_noise * rng.normal();
            }
            double* st_dst = chunk_dst + chunk_len;
            {
                double ex, ey, ox, oy;
                warp_point(st[0], st[1], ex, ey);
                warp_point(st[4], st[5], ox, oy);
                // goal displacement rotates as a vector
                const double gdx = cphi * st[7] - sphi * st[8];
                const double gdy = sphi * st[7] + cphi * st[8];
                const double raw[9] = {ex, ey, st[2], st[3], ox, oy, st[6], gdx, gdy};
                for (int j = 0; j < ds_width; ++j) {
                    st_dst[j] = (raw[j] - nm.state_mean[j]) / nm.state_std[j];
                    if (cfg.state_noise > 0.0) st_dst[j] += cfg.state_noise * rng.normal();
                }
            }
            labels[static_cast<size_t>(b)] = robot ? 1.0 : 0.0;
        }

        const Matrix z = net_forward_batch(model.net, X);
        Matrix upstream(cfg.batch, 1);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const double zb = z.data[static_cast<size_t>(b)];
            const double y = labels[static_cast<size_t>(b)];
            loss += softplus(zb) - y * zb;
            upstream.data[static_cast<size_t>(b)] = (sigmoid(zb) - y) / cfg.batch;
        }
        loss /= cfg.batch;
        tr.loss.push_back(loss);
        if (!std::isfinite(loss)) {
            std::string tail;
            for (size_t i = tr.loss.size() > 8 ? tr.loss.size() - 8 : 0; i < tr.loss.size(); ++i)
                tail += std::to_string(tr.loss[i]) + " ";
            throw DivergenceError("classifier training diverged at step " +
                                  std::to_string(step) + "; loss tail: " + tail);
        }

        NetGrads grads = net_backward_batch(model.net, X, upstream).grads;
        clip_global_norm(grads, cfg.grad_clip);
        adam_step(adam, model.net, grads, cfg.lr);
    }
    return model;
}

double robot_probability(const ClassifierModel& model, const NoiseSchedule& schedule,
                         const ActionChunk& chunk_raw, const Vec& state_raw, int k,
                         int n_draws, SeededRng& rng) {
    if (k < 0 || k > schedule.steps)
        throw std::out_of_range("robot_probability: k outside [0, K]");
    if (n_draws < 1) throw std::invalid_argument("robot_probability: n_draws must be >= 1");
    const ActionChunk cn = normalize_chunk(model.norm, chunk_raw);
    const Vec sn = normalize_state(model.norm, state_raw);
    return mean_probability(model, schedule, cn, sn, {k}, n_draws, rng)[0];
}

Vec probability_curve_for_chunk(const ClassifierModel& model, const NoiseSchedule& schedule,
                                const ActionChunk& chunk_norm, const Vec& state_norm,
                                int n_draws, SeededRng& rng) {
    return mean_probability(model, schedule, chunk_norm, state_norm,
                            full_grid(schedule.steps), n_draws, rng);
}

Vec isotonic_running_max(const Vec& curve) {
    Vec out(curve.size());
    double running = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < curve.size(); ++i) {
        running = std::max(running, curve[i]);
        out[i] = running;
    }
    return out;
}

int KStarAnnotation::lookup(int traj, int chunk) const {
    for (const KStarRecord& r : records)
        if (r.traj == traj && r.chunk == chunk) return r.k_star;
    throw std::out_of_range("KStarAnnotation: no record for trajectory " +
                            std::to_string(traj) + " chunk " + std::to_string(chunk));
}

KStarAnnotation annotate_kstar(const ClassifierModel& model, const NoiseSchedule& schedule,
                               const DemoDataset& ds, int n_draws, const SeededRng& rng,
                               bool per_trajectory_max, int jobs) {
    KStarAnnotation annot;
    annot.schedule_steps = schedule.steps;
    annot.n_draws = n_draws;
    annot.per_trajectory_max = per_trajectory_max;

    const int S = model.horizon;
    const std::vector<ChunkRef> refs = chunk_refs(ds, Split::all);
    annot.records.resize(refs.size());

    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            const ChunkRef& ref = refs[i];
            const Trajectory& traj = ds.trajectories[static_cast<size_t>(ref.traj)];
            KStarRecord rec;
            rec.traj = ref.traj;
            rec.chunk = ref.chunk;
            if (traj.embodiment == Embodiment::robot) {
                rec.k_star = 0;  // by definition, not by evaluation
            } else {
                SeededRng chunk_rng = rng.fork(i);
                const ChunkSample sample = chunk_sample(ds, ref, S);
                rec.curve = probability_curve_for_chunk(model, schedule, sample.chunk,
                                                        sample.state, n_draws, chunk_rng);
                const Vec smooth = isotonic_running_max(rec.curve);
                int k_star = schedule.steps;  // cap at K when never crossing
                for (size_t k = 0; k < smooth.size(); ++k)
                    if (smooth[k] >= 0.5) {
                        k_star = static_cast<int>(k);
                        break;
                    }
                rec.k_star = k_star;
            }
            annot.records[i] = std::move(rec);
        }
    };

    if (jobs <= 1 || refs.size() < 64) {
        worker(0, refs.size());
    } else {
        const int n_threads = std::min<int>(jobs, static_cast<int>(refs.size()));
        std::vector<std::thread> threads;
        const size_t per = (refs.size() + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const size_t b = static_cast<size_t>(t) * per;
            const size_t e = std::min(refs.size(), b + per);
            if (b < e) threads.emplace_back(worker, b, e);
        }
        for (auto& th : threads) th.join();
    }

    if (per_trajectory_max) {
        // aggregate mode: every chunk of a trajectory adopts the trajectory max
        std::vector<int> traj_max(ds.trajectories.size(), 0);
        for (const KStarRecord& r : annot.records)
            traj_max[static_cast<size_t>(r.traj)] =
                std::max(traj_max[static_cast<size_t>(r.traj)], r.k_star);
        for (KStarRecord& r : annot.records)
            if (ds.trajectories[static_cast<size_t>(r.traj)].embodiment == Embodiment::human)
                r.k_star = traj_max[static_cast<size_t>(r.traj)];
    }
    return annot;
}

ProbabilityCurve probability_curve(const ClassifierModel& model, const NoiseSchedule& schedule,
                                   const DemoDataset& ds, const std::vector<int>& ks,
                                   int n_draws, const SeededRng& rng, Split split) {
    for (int k : ks)
        if (k < 0 || k > schedule.steps)
            throw std::out_of_range("probability_curve: grid point outside [0, K]");

    ProbabilityCurve pc;
    pc.ks = ks;
    const size_t n = ks.size();
    Vec sum_r(n, 0.0), sum2_r(n, 0.0), sum_h(n, 0.0), sum2_h(n, 0.0);
    long count_r = 0, count_h = 0;

    // the split is taken within each embodiment so mixed datasets keep
    // held-out chunks on both sides
    for (Embodiment emb_kind : {Embodiment::robot, Embodiment::human}) {
        DemoDataset sub;
        sub.task = ds.task;
        sub.norm = ds.norm;
        sub.val_fraction = ds.val_fraction;
        for (const Trajectory& t : ds.trajectories)
            if (t.embodiment == emb_kind) sub.trajectories.push_back(t);
        if (sub.trajectories.empty()) continue;
        const ChunkCache cache = build_chunk_cache(sub, split, model.horizon);
        const bool robot = emb_kind == Embodiment::robot;
        for (size_t i = 0; i < cache.size(); ++i) {
            SeededRng chunk_rng = rng.fork((robot ? 0xC04BE0000ULL : 0xC04BF0000ULL) + i);
            const Vec p = mean_probability(model, schedule, cache.chunks[i], cache.states[i],
                                           ks, n_draws, chunk_rng);
            Vec& s1 = robot ? sum_r : sum_h;
            Vec& s2 = robot ? sum2_r : sum2_h;
            (robot ? count_r : count_h) += 1;
            for (size_t j = 0; j < n; ++j) {
                s1[j] += p[j];
                s2[j] += p[j] * p[j];
            }
        }
    }

    auto finalize = [&](const Vec& s1, const Vec& s2, long count, Vec& mean, Vec& se) {
        mean.assign(n, 0.0);
        se.assign(n, 0.0);
        if (count == 0) return;
        for (size_t j = 0; j < n; ++j) {
            mean[j] = s1[j] / count;
            if (count > 1) {
                const double var =
                    std::max(0.0, (s2[j] - count * mean[j] * mean[j]) / (count - 1));
                se[j] = std::sqrt(var / count);
            }
        }
    };
    finalize(sum_r, sum2_r, count_r, pc.mean_robot, pc.se_robot);
    finalize(sum_h, sum2_h, count_h, pc.mean_human, pc.se_human);
    return pc;
}

double classifier_accuracy(const ClassifierModel& model, const NoiseSchedule& schedule,
                           const DemoDataset& d_robot, const DemoDataset& d_human, int k,
                           int n_pairs, SeededRng& rng, Split split) {
    const ChunkCache robot_cache = build_chunk_cache(d_robot, split, model.horizon);
    const ChunkCache human_cache = build_chunk_cache(d_human, split, model.horizon);
    if (robot_cache.size() == 0 || human_cache.size() == 0)
        throw std::invalid_argument("classifier_accuracy: empty evaluation split");

    long correct = 0;
    for (int i = 0; i < n_pairs; ++i) {
        for (int side = 0; side < 2; ++side) {
            const bool robot = side == 0;
            const ChunkCache& cache = robot ? robot_cache : human_cache;
            const int idx = rng.uniform_int(static_cast<int>(cache.size()));
            const Vec p = mean_probability(model, schedule, cache.chunks[static_cast<size_t>(idx)],
                                           cache.states[static_cast<size_t>(idx)], {k}, 1, rng);
            const bool predicted_robot = p[0] >= 0.5;
            if (predicted_robot == robot) ++correct;
        }
    }
    return static_cast<double>(correct) / (2.0 * n_pairs);
}

// ---- persistence ----

void save_classifier(const ClassifierModel& model, const std::string& prefix,
                     const std::string& sidecar_extra_json) {
    save_net(model.net, prefix + ".bin");
    json extra = json::parse(sidecar_extra_json);
    json j{{"kind", "classifier"},
           {"horizon", model.horizon},
           {"action_dim", model.action_dim},
           {"state_dim", model.state_dim},
           {"embed_dim", model.embed_dim},
           {"norm",
            {{"action_mean", model.norm.action_mean},
             {"action_std", model.norm.action_std},
             {"state_mean", model.norm.state_mean},
             {"state_std", model.norm.state_std}}}};
    j.update(extra);
    std::ofstream os(prefix + ".json", std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + prefix + ".json");
    os << j.dump(2) << '\n';
}

ClassifierModel load_classifier(const std::string& prefix, std::string* sidecar_json_out) {
    std::ifstream is(prefix + ".json");
    if (!is) throw IoError("cannot open: " + prefix + ".json");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError("bad classifier sidecar " + prefix + ".json: " + e.what());
    }
    ClassifierModel m;
    m.net = load_net(prefix + ".bin");
    m.horizon = j.at("horizon");
    m.action_dim = j.at("action_dim");
    m.state_dim = j.at("state_dim");
    m.embed_dim = j.at("embed_dim");
    m.norm.action_mean = j.at("norm").at("action_mean").get<Vec>();
    m.norm.action_std = j.at("norm").at("action_std").get<Vec>();
    m.norm.state_mean = j.at("norm").at("state_mean").get<Vec>();
    m.norm.state_std = j.at("norm").at("state_std").get<Vec>();
    if (m.net.input_width != m.input_width())
        throw IoError("classifier sidecar dims do not match checkpoint: " + prefix);
    if (sidecar_json_out) *sidecar_json_out = j.dump();
    return m;
}

void save_annotation(const KStarAnnotation& annot, const std::string& path,
                     const std::string& config_hash, const std::string& classifier_hash) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    json header{{"record", "header"},
                {"version", 1},
                {"dataset_id", annot.dataset_id},
                {"schedule_steps", annot.schedule_steps},
                {"n_draws", annot.n_draws},
                {"per_trajectory_max", annot.per_trajectory_max},
                {"config_hash", config_hash},
                {"classifier_hash", classifier_hash},
                {"count", annot.records.size()}};
    os << header.dump() << '\n';
    char buf[40];
    for (const KStarRecord& r : annot.records) {
        std::string line = "{\"record\":\"kstar\",\"traj\":" + std::to_string(r.traj) +
                           ",\"chunk\":" + std::to_string(r.chunk) +
                           ",\"k_star\":" + std::to_string(r.k_star) + ",\"curve\":[";
        for (size_t i = 0; i < r.curve.size(); ++i) {
            if (i) line += ',';
            std::snprintf(buf, sizeof(buf), "%.17g", r.curve[i]);
            line += buf;
        }
        line += "]}";
        os << line << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

KStarAnnotation load_annotation(const std::string& path, std::string* config_hash_out,
                                std::string* classifier_hash_out) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    KStarAnnotation annot;
    std::string line;
    int record = 0;
    size_t declared = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ++record;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError("annotation parse error at record " + std::to_string(record) + " of " +
                          path + ": " + e.what());
        }
        const std::string kind = j.at("record");
        if (kind == "header") {
            annot.dataset_id = j.at("dataset_id");
            annot.schedule_steps = j.at("schedule_steps");
            annot.n_draws = j.at("n_draws");
            annot.per_trajectory_max = j.at("per_trajectory_max");
            declared = j.at("count");
            if (config_hash_out) *config_hash_out = j.at("config_hash");
            if (classifier_hash_out) *classifier_hash_out = j.at("classifier_hash");
        } else if (kind == "kstar") {
            KStarRecord r;
            r.traj = j.at("traj");
            r.chunk = j.at("chunk");
            r.k_star = j.at("k_star");
            r.curve = j.at("curve").get<Vec>();
            annot.records.push_back(std::move(r));
        } else {
            throw IoError("annotation parse error at record " + std::to_string(record) + " of " +
                          path + ": unknown record kind");
        }
    }
    if (annot.records.size() != declared)
        throw IoError("annotation " + path + " truncated: header declares " +
                      std::to_string(declared) + " records, found " +
                      std::to_string(annot.records.size()));
    return annot;
}

}  // namespace xdiff

#include "xdiff/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "xdiff/adam.hpp"
#include "xdiff/checkpoint.hpp"
#include "xdiff/errors.hpp"

namespace xdiff {

using nlohmann::json;

const char* regime_name(TrainRegime r) {
    switch (r) {
        case TrainRegime::ROBOT: return "ROBOT";
        case TrainRegime::NAIVE: return "NAIVE";
        case TrainRegime::FILTERED: return "FILTERED";
        case TrainRegime::XDIFFUSION: return "XDIFFUSION";
    }
    return "unknown";
}

TrainRegime regime_from_name(const std::string& name) {
    if (name == "ROBOT") return TrainRegime::ROBOT;
    if (name == "NAIVE") return TrainRegime::NAIVE;
    if (name == "FILTERED") return TrainRegime::FILTERED;
    if (name == "XDIFFUSION") return TrainRegime::XDIFFUSION;
    throw ConfigError("unknown training regime: " + name);
}

namespace {

/// k* for every chunk of the human dataset, indexed as [traj][chunk].
std::vector<std::vector<int>> index_kstar(const KStarAnnotation& annot, const DemoDataset& d_human) {
    std::vector<std::vector<int>> idx(d_human.trajectories.size());
    for (size_t t = 0; t < d_human.trajectories.size(); ++t)
        idx[t].assign(static_cast<size_t>(d_human.trajectories[t].length()), -1);
    for (const KStarRecord& r : annot.records) {
        if (r.traj < 0 || static_cast<size_t>(r.traj) >= idx.size()) continue;
        auto& row = idx[static_cast<size_t>(r.traj)];
        if (r.chunk >= 0 && static_cast<size_t>(r.chunk) < row.size())
            row[static_cast<size_t>(r.chunk)] = r.k_star;
    }
    for (size_t t = 0; t < idx.size(); ++t)
        for (size_t c = 0; c < idx[t].size(); ++c)
            if (idx[t][c] < 0)
                throw ConfigError("annotation is missing k* for human trajectory " +
                                  std::to_string(t) + " chunk " + std::to_string(c));
    return idx;
}

double robot_val_eps_loss(const FeedForwardNet& net, const NoiseSchedule& schedule,
                          const ChunkCache& val_cache, int embed_dim, uint64_t seed) {
    if (val_cache.size() == 0) return 0.0;
    SeededRng rng(seed);  // fixed probe stream; identical across probes
    const int probes = static_cast<int>(std::min<size_t>(val_cache.size() * 4, 128));
    double total = 0.0;
    for (int i = 0; i < probes; ++i) {
        const int idx = rng.uniform_int(static_cast<int>(val_cache.size()));
        const int k = 1 + rng.uniform_int(schedule.steps);
        const ActionChunk& a0 = val_cache.chunks[static_cast<size_t>(idx)];
        ActionChunk eps = normal_sample(rng, a0.rows, a0.cols);
        const ActionChunk ak = forward_noise(schedule, a0, k, eps);
        const Vec x = assemble_input(k, ak, val_cache.states[static_cast<size_t>(idx)], embed_dim);
        const Vec pred = net_forward(net, x);
        double l = 0.0;
        for (size_t j = 0; j < pred.size(); ++j) {
            const double d = pred[j] - eps.data[j];
            l += d * d;
        }
        total += l;
    }
    return total / probes;
}

}  // namespace

PolicyModel train_policy(TrainRegime regime, const DemoDataset& d_robot,
                         const DemoDataset& d_human, const KStarAnnotation* annotation,
                         const NoiseSchedule& schedule, const PolicyConfig& cfg,
                         PolicyTrace* trace) {
    if (d_robot.trajectories.empty())
        throw std::invalid_argument("train_policy: robot dataset is empty");
    const bool uses_human = regime != TrainRegime::ROBOT;
    if (uses_human && d_human.trajectories.empty())
        throw std::invalid_argument("train_policy: regime needs a human dataset");
    if (uses_human && !(d_robot.norm == d_human.norm))
        throw std::invalid_argument("train_policy: datasets must share one normalizer");
    if (regime == TrainRegime::XDIFFUSION && annotation == nullptr)
        throw ConfigError("XDIFFUSION requires a k* annotation");
    if (annotation && annotation->schedule_steps != schedule.steps)
        throw ConfigError("annotation was computed for a different schedule (K = " +
                          std::to_string(annotation->schedule_steps) + ")");

    const int S = cfg.horizon;
    const int da = d_robot.task.action_dim();
    const int K = schedule.steps;

    PolicyModel model;
    model.regime = regime;
    model.horizon = S;
    model.action_dim = da;
    model.state_dim = d_robot.task.state_dim();
    model.norm = d_robot.norm;
    model.schedule_steps = K;
    model.beta_min = schedule.beta_min;
    model.beta_max = schedule.beta_max;
    model.seed = cfg.seed;

    SeededRng rng(cfg.seed);
    std::vector<int> widths(static_cast<size_t>(cfg.hidden_layers), cfg.hidden_width);
    model.net = make_net(model.input_width(), widths, S * da, cfg.activation, rng);

    const ChunkCache robot_cache = build_chunk_cache(d_robot, Split::train, S);
    ChunkCache human_cache;
    if (uses_human) human_cache = build_chunk_cache(d_human, Split::train, S);

    // FILTERED restricts human sampling to oracle-feasible chunks
    std::vector<int> human_pool;
    for (size_t i = 0; i < human_cache.size(); ++i)
        if (regime != TrainRegime::FILTERED || human_cache.feasible[i])
            human_pool.push_back(static_cast<int>(i));
    const double human_frac = regime == TrainRegime::ROBOT ? 0.0 : cfg.human_sample_frac;
    if (human_frac > 0.0 && human_pool.empty())
        throw std::invalid_argument("train_policy: human chunk pool is empty");

    std::vector<std::vector<int>> kstar;
    if (regime == TrainRegime::XDIFFUSION) kstar = index_kstar(*annotation, d_human);

    std::vector<Vec> emb(static_cast<size_t>(K) + 1);
    for (int k = 1; k <= K; ++k) emb[static_cast<size_t>(k)] = step_embedding(k, model.embed_dim);

    ChunkCache robot_val;
    if (cfg.val_probe_every > 0) robot_val = build_chunk_cache(d_robot, Split::val, S);

    AdamState adam = AdamState::like(model.net);
    PolicyTrace local;
    PolicyTrace& tr = trace ? *trace : local;

    // optional parameter EMA (shadow copy)
    FeedForwardNet ema_net;
    const bool use_ema = cfg.ema_decay > 0.0;
    if (use_ema) ema_net = model.net;

    const long chunk_len = static_cast<long>(S) * da;
    const int out_width = S * da;
    Matrix X(cfg.batch, model.input_width());
    Matrix eps(cfg.batch, out_width);
    Vec weight(static_cast<size_t>(cfg.batch));

    for (int step = 0; step < cfg.steps; ++step) {
        if (cfg.val_probe_every > 0 && step % cfg.val_probe_every == 0)
            tr.val_loss.emplace_back(
                step, robot_val_eps_loss(model.net, schedule, robot_val, model.embed_dim,
                                         cfg.seed ^ 0x5A5A5A5AULL));

        for (int b = 0; b < cfg.batch; ++b) {
            const bool human = rng.uniform01() < human_frac;
            const ChunkCache& cache = human ? human_cache : robot_cache;
            int idx;
            if (human) {
                idx = human_pool[static_cast<size_t>(
                    rng.uniform_int(static_cast<int>(human_pool.size())))];
                tr.human_samples += 1;
            } else {
                idx = rng.uniform_int(static_cast<int>(robot_cache.size()));
                tr.robot_samples += 1;
            }
            const int k = 1 + rng.uniform_int(K);

            // Eq.-style selective integration: human samples contribute only
            // at noise levels k >= k*(chunk); masked samples keep their slot
            // (loss weight 0) so the k distribution is untouched.
            double w = 1.0;
            if (human && regime == TrainRegime::XDIFFUSION) {
                const ChunkRef& ref = human_cache.refs[static_cast<size_t>(idx)];
                w = k >= kstar[static_cast<size_t>(ref.traj)][static_cast<size_t>(ref.chunk)]
                        ? 1.0
                        : 0.0;
            }
            if (human && w > 0.0) tr.human_passed_mask += 1;
            weight[static_cast<size_t>(b)] = w;

            const ActionChunk& a0 = cache.chunks[static_cast<size_t>(idx)];
            const Vec& st = cache.states[static_cast<size_t>(idx)];
            const double c_sig = std::sqrt(schedule.abar(k));
            const double c_noise = std::sqrt(1.0 - schedule.abar(k));
            double* row = X.row(b);
            const Vec& e = emb[static_cast<size_t>(k)];
            std::copy(e.begin(), e.end(), row);
            double* chunk_dst = row + model.embed_dim;
            double* eps_row = eps.row(b);
            for (long i = 0; i < chunk_len; ++i) {
                const double n = rng.normal();
                eps_row[i] = n;
                chunk_dst[i] = c_sig * a0.data[i] + c_noise * n;
            }
            std::copy(st.begin(), st.end(), chunk_dst + chunk_len);
        }

        const Matrix pred = net_forward_batch(model.net, X);
        Matrix upstream(cfg.batch, out_width);
        double loss = 0.0;
        const double inv_batch = 1.0 / cfg.batch;
        for (int b = 0; b < cfg.batch; ++b) {
            const double w = weight[static_cast<size_t>(b)];
            const double* p = pred.row(b);
            const double* e = eps.row(b);
            double* u = upstream.row(b);
            double l = 0.0;
            for (int j = 0; j < out_width; ++j) {
                const double d = p[j] - e[j];
                l += d * d;
                u[j] = w * 2.0 * d * inv_batch;
            }
            loss += w * l;
        }
        loss *= inv_batch;
        tr.loss.push_back(loss);
        if (!std::isfinite(loss)) {
            std::string tail;
            for (size_t i = tr.loss.size() > 8 ? tr.loss.size() - 8 : 0; i < tr.loss.size(); ++i)
                tail += std::to_string(tr.loss[i]) + " ";
            throw DivergenceError("policy training diverged at step " + std::to_string(step) +
                                  " (" + regime_name(regime) + "); loss tail: " + tail);
        }

        NetGrads grads = net_backward_batch(model.net, X, upstream).grads;
        clip_global_norm(grads, cfg.grad_clip);
        double lr = cfg.lr;
        if (cfg.lr_cosine) {
            const double t = static_cast<double>(step) / cfg.steps;
            lr = cfg.lr * (0.1 + 0.45 * (1.0 + std::cos(M_PI * t)));
        }
        adam_step(adam, model.net, grads, lr);

        if (use_ema) {
            const double d = cfg.ema_decay;
            for (size_t li = 0; li < model.net.layers.size(); ++li) {
                Layer& s = ema_net.layers[li];
                const Layer& p = model.net.layers[li];
                for (long i = 0; i < s.w.size(); ++i)
                    s.w.data[i] = d * s.w.data[i] + (1.0 - d) * p.w.data[i];
                for (size_t i = 0; i < s.b.size(); ++i)
                    s.b[i] = d * s.b[i] + (1.0 - d) * p.b[i];
            }
        }
    }

    if (cfg.val_probe_every > 0)
        tr.val_loss.emplace_back(cfg.steps,
                                 robot_val_eps_loss(model.net, schedule, robot_val,
                                                    model.embed_dim, cfg.seed ^ 0x5A5A5A5AULL));
    if (use_ema) model.net = ema_net;
    return model;
}

ActionChunk infer_action(const PolicyModel& policy, const NoiseSchedule& schedule,
                         const Vec& state_raw, int inference_steps, SeededRng& rng) {
    if (!policy.norm.valid()) throw std::invalid_argument("infer_action: normalizer missing");
    const Vec sn = normalize_state(policy.norm, state_raw);
    const DenoiserFn den = net_denoiser(policy.net, policy.horizon, policy.action_dim,
                                        policy.embed_dim);
    ActionChunk chunk_n =
        ddpm_sample(den, schedule, sn, policy.horizon, policy.action_dim, inference_steps, rng);
    ActionChunk out = denormalize_chunk(policy.norm, chunk_n);
    if (!all_finite(out)) throw std::runtime_error("infer_action: non-finite action chunk");
    for (int r = 0; r < out.rows; ++r)  // gripper channel lives in [0, 1]
        out.at(r, 3) = std::clamp(out.at(r, 3), 0.0, 1.0);
    return out;
}

std::vector<bool> demodiffusion_step_plan(int inference_steps, double split) {
    if (split < 0.0 || split > 1.0)
        throw std::invalid_argument("demodiffusion: split must be in [0, 1]");
    const int n_human = static_cast<int>(std::ceil(split * inference_steps));
    std::vector<bool> human(static_cast<size_t>(inference_steps));
    for (int i = 0; i < inference_steps; ++i) human[static_cast<size_t>(i)] = i < n_human;
    return human;
}

ActionChunk demodiffusion_sample(const PolicyModel& human_policy,
                                 const PolicyModel& robot_policy,
                                 const NoiseSchedule& schedule, const Vec& state_raw,
                                 int inference_steps, double split, SeededRng& rng) {
    if (human_policy.horizon != robot_policy.horizon ||
        human_policy.action_dim != robot_policy.action_dim ||
        human_policy.state_dim != robot_policy.state_dim ||
        human_policy.embed_dim != robot_policy.embed_dim)
        throw std::invalid_argument("demodiffusion: policy dimensions differ");
    if (!(human_policy.norm == robot_policy.norm))
        throw std::invalid_argument("demodiffusion: policies must share one normalizer");

    const std::vector<bool> use_human = demodiffusion_step_plan(inference_steps, split);
    const Vec sn = normalize_state(robot_policy.norm, state_raw);
    const DenoiserFn den_h = net_denoiser(human_policy.net, human_policy.horizon,
                                          human_policy.action_dim, human_policy.embed_dim);
    const DenoiserFn den_r = net_denoiser(robot_policy.net, robot_policy.horizon,
                                          robot_policy.action_dim, robot_policy.embed_dim);

    int step_index = 0;
    const DenoiserFn selector = [&](int k, const Matrix& noisy, const Vec& st) -> Matrix {
        const bool human = use_human[static_cast<size_t>(step_index)];
        ++step_index;
        return human ? den_h(k, noisy, st) : den_r(k, noisy, st);
    };
    ActionChunk chunk_n = ddpm_sample(selector, schedule, sn, robot_policy.horizon,
                                      robot_policy.action_dim, inference_steps, rng);
    ActionChunk out = denormalize_chunk(robot_policy.norm, chunk_n);
    for (int r = 0; r < out.rows; ++r) out.at(r, 3) = std::clamp(out.at(r, 3), 0.0, 1.0);
    return out;
}

ChunkPolicy policy_as_chunk_policy(const PolicyModel& policy, const NoiseSchedule& schedule,
                                   int inference_steps, uint64_t seed) {
    auto counter = std::make_shared<uint64_t>(0);
    const PolicyModel* p = &policy;
    const NoiseSchedule* s = &schedule;
    return [p, s, inference_steps, seed, counter](const Vec& state) -> ActionChunk {
        SeededRng rng = SeededRng(seed).fork((*counter)++);
        return infer_action(*p, *s, state, inference_steps, rng);
    };
}

// ---- persistence ----

void save_policy(const PolicyModel& policy, const std::string& prefix,
                 const std::string& sidecar_extra_json) {
    save_net(policy.net, prefix + ".bin");
    json extra = json::parse(sidecar_extra_json);
    json j{{"kind", "policy"},
           {"regime", regime_name(policy.regime)},
           {"horizon", policy.horizon},
           {"action_dim", policy.action_dim},
           {"state_dim", policy.state_dim},
           {"embed_dim", policy.embed_dim},
           {"schedule",
            {{"steps", policy.schedule_steps},
             {"kind", "linear"},
             {"beta_min", policy.beta_min},
             {"beta_max", policy.beta_max}}},
           {"seed", policy.seed},
           {"norm",
            {{"action_mean", policy.norm.action_mean},
             {"action_std", policy.norm.action_std},
             {"state_mean", policy.norm.state_mean},
             {"state_std", policy.norm.state_std}}}};
    j.update(extra);
    std::ofstream os(prefix + ".json", std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + prefix + ".json");
    os << j.dump(2) << '\n';
}

PolicyModel load_policy(const std::string& prefix, std::string* sidecar_json_out) {
    std::ifstream is(prefix + ".json");
    if (!is) throw IoError("cannot open: " + prefix + ".json");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw IoError("bad policy sidecar " + prefix + ".json: " + e.what());
    }
    PolicyModel p;
    p.net = load_net(prefix + ".bin");
    p.regime = regime_from_name(j.at("regime"));
    p.horizon = j.at("horizon");
    p.action_dim = j.at("action_dim");
    p.state_dim = j.at("state_dim");
    p.embed_dim = j.at("embed_dim");
    p.schedule_steps = j.at("schedule").at("steps");
    p.beta_min = j.at("schedule").at("beta_min");
    p.beta_max = j.at("schedule").at("beta_max");
    p.seed = j.at("seed").get<uint64_t>();
    p.norm.action_mean = j.at("norm").at("action_mean").get<Vec>();
    p.norm.action_std = j.at("norm").at("action_std").get<Vec>();
    p.norm.state_mean = j.at("norm").at("state_mean").get<Vec>();
    p.norm.state_std = j.at("norm").at("state_std").get<Vec>();
    if (p.net.input_width != p.input_width())
        throw IoError("policy sidecar dims do not match checkpoint: " + prefix);
    if (sidecar_json_out) *sidecar_json_out = j.dump();
    return p;
}

}  // namespace xdiff

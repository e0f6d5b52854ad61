#include "fp3d/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

namespace fp3d {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt)
{
    // splitmix64 finalizer over a combination of the inputs
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1) + 0xbf58476d1ce4e5b9ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::vector<Anchor> Trajectory::actions() const
{
    std::vector<Anchor> out;
    out.reserve(steps.size());
    for (const auto &s : steps)
        out.push_back(s.action);
    return out;
}

Rtg Trajectory::episode_return() const
{
    Rtg g{0.0, 0.0, 0.0};
    for (const auto &s : steps) {
        g[0] += s.reward.w;
        g[1] += s.reward.c;
        g[2] += s.reward.h;
    }
    return g;
}

void label_rtg(Trajectory &traj)
{
    Rtg acc{0.0, 0.0, 0.0};
    for (auto it = traj.steps.rbegin(); it != traj.steps.rend(); ++it) {
        acc[0] += it->reward.w;
        acc[1] += it->reward.c;
        acc[2] += it->reward.h;
        it->rtg = acc;
    }
}

namespace {

Trajectory empty_trajectory(const Environment &env, std::uint64_t seed)
{
    Trajectory tr;
    tr.netlist = env.netlist().name;
    tr.hash = content_hash(env.netlist());
    tr.canvas = env.canvas();
    tr.seed = seed;
    return tr;
}

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads; rethrows the
/// first exception.
template <typename Body>
void parallel_for(int n, int jobs, Body body)
{
    jobs = std::clamp(jobs, 1, std::max(1, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs; ++j)
        workers.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto &w : workers)
        w.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace

Trajectory random_episode(const Environment &env, std::uint64_t seed)
{
    Trajectory tr = empty_trajectory(env, seed);
    std::mt19937_64 rng(seed);
    CanvasState s = env.reset();
    while (env.next_module(s)) {
        auto legal = env.legal_actions(s);
        if (legal.empty()) {
            tr.failed = true;
            break;
        }
        std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
        const Anchor a = legal[pick(rng)];
        auto step = env.step(s, a);
        tr.steps.push_back({s.t(), a, step.reward, {}});
        s = std::move(step.state);
    }
    tr.totals = env.metrics(s);
    label_rtg(tr);
    return tr;
}

std::vector<Trajectory> gen_random(const Environment &env, int count, std::uint64_t seed, int jobs)
{
    if (count < 1)
        throw std::invalid_argument("gen_random: count must be >= 1");
    std::vector<Trajectory> out(static_cast<std::size_t>(count));
    parallel_for(count, jobs, [&](int i) {
        for (int attempt = 0; attempt <= kMaxEpisodeRetries; ++attempt) {
            auto tr = random_episode(env, derive_seed(seed, std::uint64_t(i), std::uint64_t(attempt)));
            if (!tr.failed) {
                out[i] = std::move(tr);
                return;
            }
        }
        throw RetryBudgetExhausted("episode " + std::to_string(i) + " failed " +
                                   std::to_string(kMaxEpisodeRetries + 1) +
                                   " times: the canvas is too small for the module set");
    });
    return out;
}

RtgStats dataset_stats(std::span<const Trajectory> trajs)
{
    if (trajs.empty())
        throw std::invalid_argument("dataset_stats: empty dataset");
    RtgStats st;
    const double n = double(trajs.size());
    for (int d = 0; d < 3; ++d) {
        double sum = 0.0;
        for (const auto &t : trajs)
            sum += t.episode_return()[d];
        const double mean = sum / n;
        double var = 0.0;
        for (const auto &t : trajs) {
            const double e = t.episode_return()[d] - mean;
            var += e * e;
        }
        st.mean[d] = mean;
        st.stddev[d] = std::max(std::sqrt(var / n), 1e-6);
    }
    return st;
}

Rtg make_prompt(const RtgStats &stats) { return {stats.mean[0] + 3.0 * stats.stddev[0], stats.mean[1], stats.mean[2]}; }

// ---------------------------------------------------------------------------
// Training

std::vector<double> critic_features(std::vector<double> features, const CanvasConfig &cfg)
{
    const auto off = static_cast<std::size_t>(rtg_feature_offset(cfg));
    for (std::size_t d = 0; d < 3; ++d)
        features[off + d] = 0.0;
    return features;
}

Dataset build_dataset(Role role, const Environment &env, std::span<const Trajectory> trajs, const RtgStats &stats)
{
    const auto &cfg = env.canvas();
    const int flen = feature_length(cfg);
    const int in_dim = role == Role::actor ? flen : flen + 3;
    std::size_t total = 0;
    for (const auto &t : trajs)
        total += t.steps.size();
    Dataset ds;
    ds.samples.inputs.resize(in_dim, Eigen::Index(total));
    ds.samples.targets.resize(kOutputDim, Eigen::Index(total));
    ds.timestep.reserve(total);
    Eigen::Index col = 0;
    for (const auto &traj : trajs) {
        CanvasState s = env.reset();
        std::optional<CanvasState> prev_state;
        std::optional<Anchor> prev_action;
        for (const auto &step : traj.steps) {
            const auto maps = env.feature_maps(s, prev_state ? &*prev_state : nullptr);
            auto x = features(env, s, maps, step.rtg, stats, prev_action);
            const ContinuousAction a = normalize(step.action, cfg);
            if (role == Role::actor) {
                ds.samples.inputs.col(col) = Eigen::Map<const Eigen::VectorXd>(x.data(), flen);
                for (int d = 0; d < 3; ++d)
                    ds.samples.targets(d, col) = a[d];
            } else {
                x = critic_features(std::move(x), cfg);
                ds.samples.inputs.col(col).head(flen) = Eigen::Map<const Eigen::VectorXd>(x.data(), flen);
                for (int d = 0; d < 3; ++d)
                    ds.samples.inputs(flen + d, col) = a[d];
                const Rtg target = stats.to_critic_units(step.rtg);
                for (int d = 0; d < 3; ++d)
                    ds.samples.targets(d, col) = target[d];
            }
            ds.timestep.push_back(step.t);
            ++col;
            auto next = env.step(s, step.action);
            prev_state = std::move(s);
            s = std::move(next.state);
            prev_action = step.action;
        }
    }
    return ds;
}

double scheduled_lr(const TrainConfig &cfg, double step, double total_steps)
{
    const double warm = cfg.warmup_steps > 0 ? std::min(1.0, (step + 1.0) / double(cfg.warmup_steps)) : 1.0;
    const double decay = cfg.cosine ? 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps)) : 1.0;
    return cfg.adam.learning_rate * warm * decay;
}

TrainResult train(Role role, const Dataset &data, const TrainConfig &cfg, const Dataset *heldout)
{
    const auto n = data.samples.inputs.cols();
    if (n == 0)
        throw std::invalid_argument("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train: epochs and batch size must be >= 1");
    TrainResult result{NetParams::initialized(role, int(data.samples.inputs.rows()), derive_seed(cfg.seed, 0, 1),
                                              cfg.hidden, cfg.hidden),
                       {},
                       {}};
    std::mt19937_64 rng(derive_seed(cfg.seed, 0, 2));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    Batch batch;
    AdamConfig adam = cfg.adam;
    const double total_steps = double(cfg.epochs) * double((n + cfg.batch_size - 1) / cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, n - start);
            batch.inputs.resize(data.samples.inputs.rows(), size);
            batch.targets.resize(kOutputDim, size);
            for (Eigen::Index j = 0; j < size; ++j) {
                batch.inputs.col(j) = data.samples.inputs.col(order[start + j]);
                batch.targets.col(j) = data.samples.targets.col(order[start + j]);
            }
            double loss = 0.0;
            const Eigen::VectorXd grad = backward(result.params, batch, &loss);
            loss_sum += loss * double(size);
            adam.learning_rate = scheduled_lr(cfg, double(result.params.step), total_steps);
            optimizer_step(result.params, grad, adam);
        }
        result.loss_curve.push_back(loss_sum / double(n));
        if (heldout)
            result.heldout_curve.push_back(batch_loss(result.params, heldout->samples));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

struct Cursor
{
    CanvasState state;
    std::optional<CanvasState> prev_state;
    std::optional<Anchor> prev_action;
    Rtg rtg{};
};

/// Chooses the next action at `cur`; `rng` is null for the noise-free path.
DecisionLog decide(const Policy &policy, const Cursor &cur, const std::vector<Anchor> &legal, std::mt19937_64 *rng,
                   double noise, bool always_score = false)
{
    const auto &env = *policy.env;
    const auto &cfg = env.canvas();
    const auto maps = env.feature_maps(cur.state, cur.prev_state ? &*cur.prev_state : nullptr);
    auto x = features(env, cur.state, maps, cur.rtg, policy.stats, cur.prev_action);
    DecisionLog log;
    log.target = cur.rtg;
    log.proposal = actor_forward(*policy.actor, x);
    if (rng && noise > 0.0) {
        std::uniform_real_distribution<double> jitter(-noise, noise);
        for (int d = 0; d < 3; ++d)
            log.proposal[d] = std::clamp(log.proposal[d] + jitter(*rng), 0.0, 1.0);
    }
    log.candidates = knn(log.proposal, legal, policy.k, cfg);
    if (log.candidates.candidates.size() > 1 || always_score) {
        std::vector<ContinuousAction> cands;
        for (const auto &c : log.candidates.candidates)
            cands.push_back(normalize(c.anchor, cfg));
        log.predictions = critic_forward(*policy.critic, critic_features(std::move(x), cfg), cands);
        if (log.candidates.candidates.size() > 1)
            log.chosen = select_action(log.predictions, policy.stats.to_critic_units(cur.rtg),
                                       policy.selection_weights);
    }
    return log;
}

void advance(const Environment &env, Cursor &cur, Anchor a, Trajectory *tr, RewardVector *reward_out)
{
    auto step = env.step(cur.state, a);
    if (tr)
        tr->steps.push_back({cur.state.t(), a, step.reward, {}});
    if (reward_out)
        *reward_out = step.reward;
    for (int d = 0; d < 3; ++d)
        cur.rtg[d] -= to_rtg(step.reward)[d];
    cur.prev_state = std::move(cur.state);
    cur.state = std::move(step.state);
    cur.prev_action = a;
}

void check_policy(const Policy &policy)
{
    if (!policy.env || !policy.actor || !policy.critic)
        throw std::invalid_argument("policy needs an environment, an actor and a critic");
    if (policy.k < 1)
        throw std::invalid_argument("k must be >= 1");
    const int flen = feature_length(policy.env->canvas());
    if (policy.actor->in_dim() != flen || policy.critic->in_dim() != flen + 3)
        throw std::invalid_argument("checkpoint input sizes do not match the canvas (expected actor " +
                                    std::to_string(flen) + ", critic " + std::to_string(flen + 3) + ")");
}

/// Sum of rewards from `cur` to the end of the episode under the noise-free
/// policy. Returns nullopt on a dead end.
std::optional<Rtg> finish_greedy(const Policy &policy, Cursor cur)
{
    Rtg total{0.0, 0.0, 0.0};
    const auto &env = *policy.env;
    while (env.next_module(cur.state)) {
        auto legal = env.legal_actions(cur.state);
        if (legal.empty())
            return std::nullopt;
        auto log = decide(policy, cur, legal, nullptr, 0.0);
        RewardVector r;
        advance(env, cur, log.candidates.candidates[log.chosen].anchor, nullptr, &r);
        for (int d = 0; d < 3; ++d)
            total[d] += to_rtg(r)[d];
    }
    return total;
}

} // namespace

Rollout rollout(const Policy &policy, const Rtg &prompt, std::uint64_t seed, double noise)
{
    check_policy(policy);
    const auto &env = *policy.env;
    std::mt19937_64 rng(seed);
    Rollout out;
    out.trajectory = empty_trajectory(env, seed);
    Cursor cur{env.reset(), std::nullopt, std::nullopt, prompt};
    while (env.next_module(cur.state)) {
        auto legal = env.legal_actions(cur.state);
        if (legal.empty()) {
            out.trajectory.failed = true;
            break;
        }
        auto log = decide(policy, cur, legal, &rng, noise);
        const Anchor a = log.candidates.candidates[log.chosen].anchor;
        out.decisions.push_back(std::move(log));
        advance(env, cur, a, &out.trajectory, nullptr);
    }
    out.trajectory.totals = env.metrics(cur.state);
    label_rtg(out.trajectory);
    out.final_state = std::move(cur.state);
    return out;
}

std::size_t best_of_n(std::span<const Trajectory> runs)
{
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].failed)
            continue;
        if (!best || runs[i].totals.total_wirelength < runs[*best].totals.total_wirelength)
            best = i;
    }
    if (!best)
        throw std::runtime_error("all " + std::to_string(runs.size()) + " rollouts failed");
    return *best;
}

std::vector<Rollout> sample_rollouts(const Policy &policy, const Rtg &prompt, int n, std::uint64_t seed, int jobs)
{
    if (n < 1)
        throw std::invalid_argument("need at least one rollout");
    check_policy(policy);
    std::vector<Rollout> out(static_cast<std::size_t>(n));
    parallel_for(n, jobs, [&](int i) { out[i] = rollout(policy, prompt, derive_seed(seed, std::uint64_t(i), 7), kBestOfNoise); });
    return out;
}

ErrorCurve critic_error_study(const Environment &env, const NetParams &critic, const RtgStats &stats,
                              std::span<const Trajectory> heldout)
{
    const Dataset ds = build_dataset(Role::critic, env, heldout, stats);
    const Eigen::MatrixXd pred = forward(critic, ds.samples.inputs);
    const int steps = env.module_count();
    ErrorCurve curve;
    curve.mean.assign(steps, Rtg{0.0, 0.0, 0.0});
    curve.variance.assign(steps, Rtg{0.0, 0.0, 0.0});
    std::vector<std::vector<Rtg>> per_step(steps);
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
        Rtg e{};
        for (int d = 0; d < 3; ++d) {
            const double diff = pred(d, j) - ds.samples.targets(d, j);
            e[d] = diff * diff;
        }
        per_step[ds.timestep[j]].push_back(e);
    }
    for (int t = 0; t < steps; ++t) {
        const auto &v = per_step[t];
        if (v.empty())
            continue;
        for (int d = 0; d < 3; ++d) {
            double sum = 0.0;
            for (const auto &e : v)
                sum += e[d];
            const double mean = sum / double(v.size());
            double var = 0.0;
            for (const auto &e : v)
                var += (e[d] - mean) * (e[d] - mean);
            curve.mean[t][d] = mean;
            curve.variance[t][d] = var / double(v.size());
        }
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Bound checker

double BoundReport::holds_fraction() const
{
    if (steps.empty())
        return 0.0;
    return double(std::count_if(steps.begin(), steps.end(), [](const auto &s) { return s.holds; })) / steps.size();
}

double BoundReport::triangle_fraction() const
{
    if (steps.empty())
        return 0.0;
    return double(std::count_if(steps.begin(), steps.end(), [](const auto &s) { return s.triangle; })) /
           steps.size();
}

BoundReport bound_check(const Policy &policy, const Rtg &prompt, int component, std::uint64_t seed, double noise,
                        int max_actions)
{
    if (component < 0 || component > 2)
        throw std::invalid_argument("component must be 0 (w), 1 (c) or 2 (h)");
    check_policy(policy);
    const auto &env = *policy.env;
    const auto &cfg = env.canvas();
    const double sign = component == 0 ? 1.0 : -1.0;
    const double scale = policy.stats.critic_scale()[component];
    // Rounding slack for comparisons between sums of square roots.
    constexpr double slack = 1e-12;

    std::mt19937_64 rng(seed);
    BoundReport report;
    Cursor cur{env.reset(), std::nullopt, std::nullopt, prompt};
    while (env.next_module(cur.state)) {
        const auto legal = env.legal_actions(cur.state);
        if (legal.empty())
            break;
        if (int(legal.size()) > max_actions)
            throw ActionSpaceTooLarge("step " + std::to_string(cur.state.t()) + " has " +
                                      std::to_string(legal.size()) + " legal actions, more than the " +
                                      std::to_string(max_actions) + " an exhaustive scan allows");

        // Value of every legal action: its own reward plus a noise-free finish.
        std::vector<double> value(legal.size());
        std::vector<ContinuousAction> point(legal.size());
        for (std::size_t i = 0; i < legal.size(); ++i) {
            Cursor branch = cur;
            RewardVector r;
            advance(env, branch, legal[i], nullptr, &r);
            const auto rest = finish_greedy(policy, std::move(branch));
            const double total = to_rtg(r)[component] + (rest ? (*rest)[component] : 0.0);
            value[i] = sign * total;
            point[i] = normalize(legal[i], cfg);
        }
        const std::size_t best = std::size_t(std::max_element(value.begin(), value.end()) - value.begin());

        double lipschitz = 0.0;
        for (std::size_t i = 0; i < legal.size(); ++i)
            for (std::size_t j = i + 1; j < legal.size(); ++j)
                lipschitz = std::max(lipschitz, std::abs(value[i] - value[j]) / distance(point[i], point[j]));

        auto log = decide(policy, cur, legal, &rng, noise, true);
        const Anchor chosen = log.candidates.candidates[log.chosen].anchor;
        auto index_of = [&](Anchor a) {
            return std::size_t(std::lower_bound(legal.begin(), legal.end(), a) - legal.begin());
        };

        BoundStep row;
        row.t = cur.state.t();
        row.legal_count = int(legal.size());
        row.lipschitz = lipschitz;
        row.gap = value[best] - value[index_of(chosen)];
        row.proposal_gap = distance(log.proposal, point[best]);
        row.psi_k = log.candidates.psi_k;
        row.candidate_gap = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < log.candidates.candidates.size(); ++c) {
            const auto idx = index_of(log.candidates.candidates[c].anchor);
            row.candidate_gap = std::min(row.candidate_gap, distance(point[idx], point[best]));
            const double predicted = sign * log.predictions[c][component] * scale;
            row.critic_error = std::max(row.critic_error, std::abs(predicted - value[idx]));
        }
        row.bound = lipschitz * (row.proposal_gap + row.psi_k) + 2.0 * row.critic_error;
        row.holds = row.gap <= row.bound + slack;
        row.triangle = row.candidate_gap <= row.proposal_gap + row.psi_k + slack;
        row.lipschitz_selftest = row.gap <= lipschitz * distance(point[best], normalize(chosen, cfg)) + slack;
        report.steps.push_back(row);

        advance(env, cur, chosen, nullptr, nullptr);
    }
    return report;
}

} // namespace fp3d

#pragma once

#include "fp3d/approximator.hpp"
#include "fp3d/environment.hpp"
#include "fp3d/features.hpp"
#include "fp3d/sldas.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fp3d {

struct StepRecord
{
    int t = 0;
    Anchor action;
    RewardVector reward;
    /// Suffix sum of rewards from this step on (filled by label_rtg).
    Rtg rtg{0.0, 0.0, 0.0};

    friend bool operator==(const StepRecord &, const StepRecord &) = default;
};

struct Trajectory
{
    std::string netlist;
    std::string hash;
    CanvasConfig canvas;
    std::uint64_t seed = 0;
    bool failed = false;
    std::vector<StepRecord> steps;
    PlacementMetrics totals;

    [[nodiscard]] std::vector<Anchor> actions() const;
    [[nodiscard]] Rtg episode_return() const;
};

class RetryBudgetExhausted : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kMaxEpisodeRetries = 100;

/// One episode of uniformly random legal actions. May come back failed.
Trajectory random_episode(const Environment &env, std::uint64_t seed);

/// `count` non-failed random trajectories, labeled with returns-to-go.
/// Episode i uses a generator seeded from (seed, i, attempt); failed
/// attempts are retried up to kMaxEpisodeRetries times. The result does not
/// depend on `jobs`.
std::vector<Trajectory> gen_random(const Environment &env, int count, std::uint64_t seed, int jobs = 1);

/// rtg_t = sum of rewards from t to the end, componentwise.
void label_rtg(Trajectory &traj);

/// Mean and population standard deviation (floored at 1e-6) of g_0.
RtgStats dataset_stats(std::span<const Trajectory> trajs);

/// (mu_w + 3 sigma_w, mu_c, mu_h).
Rtg make_prompt(const RtgStats &stats);

// --------------------------------------------------------------------------
// Training

struct TrainConfig
{
    int epochs = 200;
    int batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 0;
    int hidden = kDefaultHidden;
    // Linear ramp then cosine decay to zero. At the critic's peak rate a cold
    // start kills every ReLU unit within the first epoch.
    int warmup_steps = 50;
    bool cosine = true;
};

/// Learning rate applied at optimizer step `step` of `total_steps`.
double scheduled_lr(const TrainConfig &cfg, double step, double total_steps);

inline double default_learning_rate(Role role) { return role == Role::actor ? 5e-4 : 5e-3; }

/// Supervised samples for one role, one column per trajectory step.
struct Dataset
{
    Batch samples;
    std::vector<int> timestep;
};

/// Replays every trajectory. Actor inputs see the previous action and the
/// current RTG; targets are the normalized taken actions. Critic inputs are
/// the same features with the RTG block zeroed, followed by the normalized
/// taken action; targets are RTGs in critic units.
Dataset build_dataset(Role role, const Environment &env, std::span<const Trajectory> trajs, const RtgStats &stats);

/// Features the critic sees for a state (RTG block zeroed).
std::vector<double> critic_features(std::vector<double> features, const CanvasConfig &cfg);

struct TrainResult
{
    NetParams params;
    /// Mean training loss per epoch.
    std::vector<double> loss_curve;
    /// Held-out loss after each epoch (empty without held-out data).
    std::vector<double> heldout_curve;
};

TrainResult train(Role role, const Dataset &data, const TrainConfig &cfg, const Dataset *heldout = nullptr);

// --------------------------------------------------------------------------
// Inference

struct Policy
{
    const Environment *env = nullptr;
    const NetParams *actor = nullptr;
    const NetParams *critic = nullptr;
    RtgStats stats;
    int k = 5;
    Rtg selection_weights{1.0, 1.0, 1.0};
};

struct DecisionLog
{
    ContinuousAction proposal;
    CandidateSet candidates;
    /// Critic predictions in critic units (empty when k = 1).
    std::vector<Rtg> predictions;
    std::size_t chosen = 0;
    /// RTG the step was conditioned on.
    Rtg target{};
};

struct Rollout
{
    Trajectory trajectory;
    CanvasState final_state;
    std::vector<DecisionLog> decisions;
};

inline constexpr double kBestOfNoise = 0.02;

/// Autoregressive placement from `prompt`, decrementing the RTG by each
/// received reward. `noise` adds seeded uniform jitter in +-noise to each
/// actor proposal before projection.
Rollout rollout(const Policy &policy, const Rtg &prompt, std::uint64_t seed, double noise = 0.0);

/// Index of the non-failed trajectory with the smallest final wirelength,
/// ties to the lower index. Throws std::runtime_error when all failed.
std::size_t best_of_n(std::span<const Trajectory> runs);

/// n rollouts with seeds derived from `seed`, each with kBestOfNoise jitter.
std::vector<Rollout> sample_rollouts(const Policy &policy, const Rtg &prompt, int n, std::uint64_t seed,
                                     int jobs = 1);

/// Per-timestep squared critic error in critic units.
struct ErrorCurve
{
    std::vector<Rtg> mean;
    std::vector<Rtg> variance;

    /// Sum of the component means at step t.
    [[nodiscard]] double total(std::size_t t) const { return mean[t][0] + mean[t][1] + mean[t][2]; }
};

ErrorCurve critic_error_study(const Environment &env, const NetParams &critic, const RtgStats &stats,
                              std::span<const Trajectory> heldout);

// --------------------------------------------------------------------------
// Error bound instrumentation

class ActionSpaceTooLarge : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct BoundStep
{
    int t = 0;
    double gap = 0.0;              // value gap of the selected action
    double lipschitz = 0.0;        // empirical max ratio over legal pairs
    double candidate_gap = 0.0;    // d_t
    double proposal_gap = 0.0;     // delta_t
    double psi_k = 0.0;
    double critic_error = 0.0;     // max over candidates, denormalized
    double bound = 0.0;            // L (delta + psi) + 2 eps
    bool holds = false;
    bool triangle = false;         // d <= delta + psi
    bool lipschitz_selftest = false; // gap <= L * |a* - a~|
    int legal_count = 0;
};

struct BoundReport
{
    std::vector<BoundStep> steps;

    [[nodiscard]] double holds_fraction() const;
    [[nodiscard]] double triangle_fraction() const;
};

inline constexpr int kMaxBoundActions = 500;

/// One noisy rollout from `prompt` that, at every step, scores each legal
/// action by placing it and finishing the episode with the noise-free
/// policy. `component` selects w (0), c (1) or h (2); penalties are
/// negated so larger is better. Throws ActionSpaceTooLarge when a step has
/// more than `max_actions` legal anchors.
BoundReport bound_check(const Policy &policy, const Rtg &prompt, int component, std::uint64_t seed,
                        double noise = kBestOfNoise, int max_actions = kMaxBoundActions);

// --------------------------------------------------------------------------
// Stores

/// JSON Lines: a header per episode, then one line per step.
void write_trajectories(std::ostream &os, std::span<const Trajectory> trajs);
std::vector<Trajectory> read_trajectories(std::istream &is);

void write_bound_csv(std::ostream &os, const BoundReport &report);
void write_error_csv(std::ostream &os, const ErrorCurve &curve);

/// Derived seed for stream `index` of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0);

} // namespace fp3d

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "solar_ddpg/checkpoint.hpp"
#include "solar_ddpg/ddpg_agent.hpp"
#include "solar_ddpg/run_config.hpp"

namespace solar_ddpg {

/// Loads the configured data source and splits it into train and test weeks.
DataSplit load_split(const DataConfig& data);

// Per-run seeds, all derived from one root so a run is reproducible from it.
struct TrialSeeds {
    std::uint64_t root = 0;
    AgentSeeds agent;
    std::uint64_t week_sampling = 0;

    static TrialSeeds from_root(std::uint64_t root);
    bool operator==(const TrialSeeds&) const = default;
};

struct AgentCheckpoint {
    HyperParams hp;
    ObservationScales scales;
    TrialSeeds seeds;
    EnvConfig env;
    AgentNets nets;
    std::int64_t iterations = 0;  // environment steps trained
};

TensorArchive to_archive(const AgentCheckpoint& ckpt);
AgentCheckpoint from_archive(const TensorArchive& archive);
void save_checkpoint(const AgentCheckpoint& ckpt, const std::filesystem::path& path);
AgentCheckpoint load_checkpoint(const std::filesystem::path& path);

struct CurvePoint {
    std::int64_t iteration = 0;        // environment steps so far
    double validation_reward = 0.0;    // noise-free reward on the validation episode
    double mean_train_reward = 0.0;    // mean reward of training episodes finished since the last point
    double mean_critic_loss = 0.0;
    double mean_actor_objective = 0.0;  // mean Q(s, mu(s)) over the minibatches
    double noise_sigma = 0.0;
    bool operator==(const CurvePoint&) const = default;
};

enum class TrialStatus { Completed, Diverged };
std::string trial_status_name(TrialStatus s);

struct TrialResult {
    HyperParams hyperparams;
    double mean_episode_reward = 0.0;  // over the evaluation episodes
    std::vector<double> episode_rewards;
    std::vector<CurvePoint> training_curve;
    TrialSeeds seeds;
    double wall_time = 0.0;  // seconds, informational only
    TrialStatus status = TrialStatus::Completed;
    std::string message;  // divergence details
};

struct TrainingOutput {
    AgentCheckpoint checkpoint;
    TrialResult result;
};

// Training curve CSV: iteration,validation_reward,mean_train_reward,mean_critic_loss,mean_actor_objective,noise_sigma
void write_training_log(std::ostream& out, std::span<const CurvePoint> curve);
std::vector<CurvePoint> read_training_log(std::istream& in);

/// Trains for config.agent.training_iterations environment steps (one update
/// per step once the buffer holds a batch). Episodes are single training
/// weeks drawn with replacement, or the whole concatenated training set in
/// paper mode. Exploration sigma decays linearly to its final value. Every
/// eval_interval steps, and at the end, the greedy policy is rolled out on
/// the validation week. A non-finite loss stops training with status
/// Diverged, keeping the last finite parameters. The final checkpoint is
/// evaluated on the test weeks to fill mean_episode_reward.
TrainingOutput run_training(const RunConfig& config, const DataSplit& split);

struct EvaluationResult {
    double mean_reward = 0.0;
    std::vector<double> episode_rewards;
    std::vector<std::chrono::sys_days> episode_starts;
    std::vector<StepRecord> steps;  // settlement log of every evaluated step, in order
};

/// Noise-free rollouts, one episode per week (or one over all weeks in paper mode).
EvaluationResult evaluate(const AgentCheckpoint& ckpt, std::span<const WeekTrace> weeks, bool paper_mode = false);

struct SweepEntry {
    double capacity = 0.0;
    double test_reward = 0.0;      // DDPG, mean per evaluation episode
    double oracle_cost = 0.0;      // perfect-foresight DP, same episodes
    double greedy_cost = 0.0;      // rule-based policy, same episodes
    double no_battery_cost = 0.0;  // same episodes
    TrialSeeds seeds;
    TrialStatus status = TrialStatus::Completed;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    std::vector<TrialResult> trials;
};

/// Mean per-episode costs of the reference policies on the evaluation episodes.
struct BaselineCosts {
    double no_battery = 0.0;
    double greedy = 0.0;
    double oracle = 0.0;
};
BaselineCosts baseline_costs(const EnvConfig& env, const OracleConfig& oracle, std::span<const WeekTrace> weeks,
                             bool paper_mode = false);

/// Stream seed for the i-th trial of a sweep or search.
std::uint64_t trial_root_seed(std::uint64_t root, std::size_t index);

/// One train+evaluate per capacity with seeds from trial_root_seed(root, i).
/// When out_dir is set, each size writes size_<capacity>/ with its training
/// log, checkpoint and evaluation settlement log.
SweepResult battery_size_sweep(const RunConfig& base, const DataSplit& split, std::span<const double> sizes,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Sweep table CSV: capacity,test_reward,oracle_cost,greedy_cost,no_battery_cost,status,seed
void write_sweep_table(std::ostream& out, const SweepResult& sweep);

/// Grid cross-product in (actor, critic) order with `draws` learning rates per
/// cell, each drawn from U[lr_min, lr_max] (or log-uniform) and used for both
/// networks. Other hyperparameters come from `base`.
std::vector<HyperParams> sample_hyperparams(const SearchSpace& space, std::size_t draws, const HyperParams& base,
                                            std::mt19937_64& rng);

struct SearchTrial {
    std::size_t index = 0;  // order of sampling
    TrialResult result;
};

/// Runs `budget` trials (the grid is cycled with ceil(budget / cells) draws
/// per cell, then truncated) on space.threads worker threads. Each trial gets
/// trial_root_seed(root, index), so results do not depend on scheduling. The
/// returned list is sorted by descending mean reward with diverged trials
/// last; ties keep sampling order. Throws NumericError if every trial diverged.
std::vector<SearchTrial> hyperparameter_search(const RunConfig& base, const DataSplit& split, std::size_t budget,
                                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Ranked table CSV: rank,trial,lr,actor_hiddens,critic_hiddens,mean_episode_reward,status,seed
void write_ranked_table(std::ostream& out, std::span<const SearchTrial> ranked);

/// (best - worst) / |worst| over completed trials.
double reward_spread(std::span<const SearchTrial> ranked);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

std::string format_layers(const std::vector<int>& layers);  // e.g. "200-200"

}  // namespace solar_ddpg

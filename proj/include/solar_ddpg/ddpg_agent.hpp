#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "solar_ddpg/battery_env.hpp"
#include "solar_ddpg/neural.hpp"

namespace solar_ddpg {

inline constexpr int kObsDim = Observation::kSize;
inline constexpr int kActDim = 3;

using ObsVec = Eigen::Matrix<double, kObsDim, 1>;
using ActVec = Eigen::Matrix<double, kActDim, 1>;
using Mlp = nn::MlpParams<double>;

enum class NoiseKind { OrnsteinUhlenbeck, Gaussian };

struct HyperParams {
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 64;
    std::size_t buffer_capacity = 1'000'000;
    std::vector<int> actor_hiddens{200, 200};
    std::vector<int> critic_hiddens{300, 300};
    NoiseKind noise_kind = NoiseKind::OrnsteinUhlenbeck;
    double noise_theta = 0.15;
    double noise_sigma = 0.2;        // at the start of training
    double noise_sigma_final = 0.02;  // reached linearly at the end of training
    std::int64_t training_iterations = 50'000;  // environment steps, each followed by an update

    void validate() const;
    bool operator==(const HyperParams&) const = default;
};

// Per-feature divisors, in Observation field order.
struct ObservationScales {
    std::array<double, kObsDim> scale{1, 1, 1, 1, 1, 1, 1};
    bool operator==(const ObservationScales&) const = default;
};

/// capacity and charge scale by the capacity; gc, cl, cs by their maxima over
/// the given weeks; residuals by the matching demand maxima. Zero maxima fall
/// back to 1.
ObservationScales compute_observation_scales(std::span<const WeekTrace> weeks, double capacity);

ObsVec normalize_observation(const Observation& obs, const ObservationScales& scales);

struct Transition {
    ObsVec s;
    ActVec a;  // normalized request in [0,1]^3
    double r = 0.0;
    ObsVec s_next;
    bool terminal = false;
};

struct Minibatch {
    Eigen::MatrixXd states;       // kObsDim x N
    Eigen::MatrixXd actions;      // kActDim x N
    Eigen::VectorXd rewards;      // N
    Eigen::MatrixXd next_states;  // kObsDim x N
    Eigen::VectorXd terminal;     // N, 1.0 where the transition ends the episode

    Eigen::Index size() const { return states.cols(); }
};

Minibatch make_minibatch(std::span<const Transition> transitions);

/// Fixed-capacity ring of transitions; once full the oldest entry is overwritten.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    // i = 0 is the oldest stored transition.
    const Transition& at(std::size_t i) const;

    /// n uniform draws with replacement, or nullopt when fewer than n are stored.
    std::optional<Minibatch> sample(std::size_t n, std::mt19937_64& rng) const;
    std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> data_;
};

class ExplorationNoise {
public:
    ExplorationNoise(NoiseKind kind, double theta, double sigma, std::uint64_t seed);

    void reset() { state_.setZero(); }
    ActVec sample();

    void set_sigma(double sigma);
    double sigma() const { return sigma_; }
    const ActVec& state() const { return state_; }

private:
    NoiseKind kind_;
    double theta_;
    double sigma_;
    ActVec state_ = ActVec::Zero();
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct AgentNets {
    Mlp actor;
    Mlp critic;
    Mlp target_actor;
    Mlp target_critic;
    nn::AdamState<double> actor_opt;
    nn::AdamState<double> critic_opt;
};

/// Actor [7, hiddens..., 3] with logistic output, critic [10, hiddens..., 1]
/// with identity output; targets start as copies.
AgentNets make_agent_nets(const HyperParams& hp, std::uint64_t seed);

struct ActResult {
    Action request;     // kWh, in [0, capacity] per component
    ActVec normalized;  // in [0, 1]^3, what the replay buffer stores
};

/// mu(s) plus optional noise, clamped to [0,1]^3 and scaled by capacity.
ActResult act(const AgentNets& nets, const ObsVec& obs, ExplorationNoise* noise, double capacity);

/// y = r + gamma * Q'(s', mu'(s')), with the bootstrap dropped on terminal rows.
Eigen::VectorXd critic_targets(const Minibatch& batch, const Mlp& target_actor, const Mlp& target_critic, double gamma);

// Critic input rows: observation then action.
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions);

struct ActorGradient {
    Mlp grads;         // of the objective J, to be ascended
    double objective;  // J = (1/N) sum_i Q(s_i, mu(s_i))
};

/// Deterministic policy gradient of J through the critic into the actor.
ActorGradient actor_objective_gradient(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& states);

struct TrainStats {
    double critic_loss = 0.0;      // before the update
    double actor_objective = 0.0;  // with the updated critic, before the actor update
};

/// One critic step on the TD loss, then one actor ascent step. Targets untouched.
TrainStats train_step(AgentNets& nets, const Minibatch& batch, const HyperParams& hp);

/// target <- tau * online + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& online, double tau);

struct AgentSeeds {
    std::uint64_t init = 1;
    std::uint64_t noise = 2;
    std::uint64_t sampling = 3;
    bool operator==(const AgentSeeds&) const = default;
};

class DdpgAgent {
public:
    DdpgAgent(HyperParams hp, ObservationScales scales, AgentSeeds seeds);
    DdpgAgent(HyperParams hp, ObservationScales scales, AgentSeeds seeds, AgentNets nets);

    const HyperParams& hyperparams() const { return hp_; }
    const ObservationScales& scales() const { return scales_; }
    const AgentSeeds& seeds() const { return seeds_; }
    AgentNets& nets() { return nets_; }
    const AgentNets& nets() const { return nets_; }
    ReplayBuffer& buffer() { return buffer_; }
    ExplorationNoise& noise() { return noise_; }
    std::mt19937_64& sampling_rng() { return sampling_rng_; }

    /// Noise-free policy in kWh, usable with rollout().
    Policy greedy_policy() const;

private:
    HyperParams hp_;
    ObservationScales scales_;
    AgentSeeds seeds_;
    AgentNets nets_;
    ReplayBuffer buffer_;
    ExplorationNoise noise_;
    std::mt19937_64 sampling_rng_;
};

enum class EpisodeMode { Train, Eval };

struct EpisodeStats {
    double reward = 0.0;
    std::size_t steps = 0;
    std::size_t stored = 0;
    std::size_t updates = 0;
    double mean_critic_loss = 0.0;
    double mean_actor_objective = 0.0;
};

/// Runs one episode on `env` from reset. In training mode every step acts with
/// noise, stores the transition and, once the buffer holds a batch, performs
/// train_step followed by soft updates of both targets. `max_steps` truncates
/// the episode (the last executed step is then not marked terminal).
EpisodeStats run_episode(DdpgAgent& agent, BatteryEnv& env, EpisodeMode mode,
                         std::size_t max_steps = static_cast<std::size_t>(-1));

}  // namespace solar_ddpg

#include "solar_ddpg/ddpg_agent.hpp"

#include <algorithm>
#include <cmath>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/seeding.hpp"

namespace solar_ddpg {

void HyperParams::validate() const {
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be at least 1");
    if (actor_hiddens.empty() || critic_hiddens.empty()) throw ConfigError("hidden layer lists must be non-empty");
    for (int h : actor_hiddens)
        if (h <= 0) throw ConfigError("actor hidden sizes must be positive");
    for (int h : critic_hiddens)
        if (h <= 0) throw ConfigError("critic hidden sizes must be positive");
    if (!(noise_sigma >= 0.0) || !(noise_sigma_final >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    if (!(noise_theta >= 0.0)) throw ConfigError("noise theta must be non-negative");
    if (training_iterations < 0) throw ConfigError("training_iterations must be non-negative");
}

ObservationScales compute_observation_scales(std::span<const WeekTrace> weeks, double capacity) {
    if (!(capacity > 0.0)) throw ConfigError("capacity must be positive");
    double gc = 0.0, cl = 0.0, cs = 0.0;
    for (const auto& w : weeks)
        for (const auto& r : w.records()) {
            gc = std::max(gc, r.gc);
            cl = std::max(cl, r.cl);
            cs = std::max(cs, r.cs);
        }
    auto positive = [](double v) { return v > 0.0 ? v : 1.0; };
    ObservationScales s;
    s.scale = {capacity, capacity, positive(gc), positive(cl), positive(cs), positive(cl), positive(gc)};
    return s;
}

ObsVec normalize_observation(const Observation& obs, const ObservationScales& scales) {
    for (double s : scales.scale)
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("observation scales must be positive and finite");
    ObsVec v;
    v << obs.capacity, obs.charge, obs.gc, obs.cl, obs.cs, obs.residual_cl, obs.residual_gc;
    for (int i = 0; i < kObsDim; ++i) v[i] /= scales.scale[static_cast<std::size_t>(i)];
    return v;
}

Minibatch make_minibatch(std::span<const Transition> transitions) {
    const auto n = static_cast<Eigen::Index>(transitions.size());
    Minibatch b{Eigen::MatrixXd(kObsDim, n), Eigen::MatrixXd(kActDim, n), Eigen::VectorXd(n),
                Eigen::MatrixXd(kObsDim, n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = transitions[static_cast<std::size_t>(i)];
        b.states.col(i) = t.s;
        b.actions.col(i) = t.a;
        b.rewards[i] = t.r;
        b.next_states.col(i) = t.s_next;
        b.terminal[i] = t.terminal ? 1.0 : 0.0;
    }
    return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
    if (data_.size() < capacity_) {
        data_.push_back(t);
        return;
    }
    data_[head_] = t;
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= data_.size()) throw DomainError("replay index out of range");
    return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
    std::vector<std::size_t> idx(n);
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

std::optional<Minibatch> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    if (data_.size() < n || n == 0) return std::nullopt;
    const auto idx = sample_indices(n, rng);
    const auto m = static_cast<Eigen::Index>(n);
    Minibatch b{Eigen::MatrixXd(kObsDim, m), Eigen::MatrixXd(kActDim, m), Eigen::VectorXd(m),
                Eigen::MatrixXd(kObsDim, m), Eigen::VectorXd(m)};
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto& t = data_[idx[static_cast<std::size_t>(k)]];
        b.states.col(k) = t.s;
        b.actions.col(k) = t.a;
        b.rewards[k] = t.r;
        b.next_states.col(k) = t.s_next;
        b.terminal[k] = t.terminal ? 1.0 : 0.0;
    }
    return b;
}

ExplorationNoise::ExplorationNoise(NoiseKind kind, double theta, double sigma, std::uint64_t seed)
    : kind_(kind), theta_(theta), sigma_(sigma), rng_(seed) {
    if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
}

void ExplorationNoise::set_sigma(double sigma) {
    if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
    sigma_ = sigma;
}

ActVec ExplorationNoise::sample() {
    ActVec draw;
    for (int i = 0; i < kActDim; ++i) draw[i] = normal_(rng_);
    if (kind_ == NoiseKind::Gaussian) {
        state_ = sigma_ * draw;
    } else {
        // Unit time step: x <- x - theta * x + sigma * N(0, 1)
        state_ = state_ - theta_ * state_ + sigma_ * draw;
    }
    return state_;
}

AgentNets make_agent_nets(const HyperParams& hp, std::uint64_t seed) {
    hp.validate();
    std::vector<int> actor_sizes{kObsDim};
    actor_sizes.insert(actor_sizes.end(), hp.actor_hiddens.begin(), hp.actor_hiddens.end());
    actor_sizes.push_back(kActDim);
    std::vector<int> critic_sizes{kObsDim + kActDim};
    critic_sizes.insert(critic_sizes.end(), hp.critic_hiddens.begin(), hp.critic_hiddens.end());
    critic_sizes.push_back(1);

    AgentNets nets;
    nets.actor = nn::init_mlp<double>(actor_sizes, nn::Activation::Sigmoid, derive_seed(seed, 0));
    nets.critic = nn::init_mlp<double>(critic_sizes, nn::Activation::Identity, derive_seed(seed, 1));
    nets.target_actor = nets.actor;
    nets.target_critic = nets.critic;
    nets.actor_opt = nn::make_adam_state(nets.actor);
    nets.critic_opt = nn::make_adam_state(nets.critic);
    return nets;
}

ActResult act(const AgentNets& nets, const ObsVec& obs, ExplorationNoise* noise, double capacity) {
    ActVec a = nn::predict(nets.actor, obs);
    if (noise != nullptr) a += noise->sample();
    a = a.cwiseMax(0.0).cwiseMin(1.0);
    return {{a[0] * capacity, a[1] * capacity, a[2] * capacity}, a};
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
    if (states.cols() != actions.cols()) throw ShapeError("state and action batches differ in size");
    Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
    x.topRows(states.rows()) = states;
    x.bottomRows(actions.rows()) = actions;
    return x;
}

Eigen::VectorXd critic_targets(const Minibatch& batch, const Mlp& target_actor, const Mlp& target_critic,
                               double gamma) {
    const Eigen::MatrixXd next_actions = nn::predict(target_actor, batch.next_states);
    const Eigen::MatrixXd next_q = nn::predict(target_critic, critic_input(batch.next_states, next_actions));
    Eigen::VectorXd bootstrap = next_q.row(0).transpose();
    return batch.rewards.array() + gamma * (1.0 - batch.terminal.array()) * bootstrap.array();
}

ActorGradient actor_objective_gradient(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& states) {
    const auto n = static_cast<double>(states.cols());
    auto [mu, actor_cache] = nn::forward(actor, states);
    auto [q, critic_cache] = nn::forward(critic, critic_input(states, mu));
    const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, states.cols(), 1.0 / n);
    auto [critic_grads, dx] = nn::backward(critic, critic_cache, dq);
    const Eigen::MatrixXd dmu = dx.bottomRows(kActDim);
    auto [actor_grads, unused] = nn::backward(actor, actor_cache, dmu);
    return {std::move(actor_grads), q.mean()};
}

namespace {

void scale_in_place(Mlp& p, double factor) {
    for (auto& l : p.layers) {
        l.weight *= factor;
        l.bias *= factor;
    }
}

}  // namespace

TrainStats train_step(AgentNets& nets, const Minibatch& batch, const HyperParams& hp) {
    if (batch.size() != hp.batch_size)
        throw ShapeError("minibatch has " + std::to_string(batch.size()) + " rows, batch_size is " +
                         std::to_string(hp.batch_size));
    const auto n = static_cast<double>(batch.size());
    TrainStats stats;

    const Eigen::VectorXd y = critic_targets(batch, nets.target_actor, nets.target_critic, hp.gamma);
    auto [q, cache] = nn::forward(nets.critic, critic_input(batch.states, batch.actions));
    const Eigen::RowVectorXd diff = q.row(0) - y.transpose();
    stats.critic_loss = diff.squaredNorm() / n;
    if (!std::isfinite(stats.critic_loss)) throw NumericError("critic loss is not finite");

    auto [critic_grads, unused] = nn::backward(nets.critic, cache, (2.0 / n) * diff);
    nn::adam_update(nets.critic, critic_grads, nets.critic_opt, hp.critic_lr);

    ActorGradient ag = actor_objective_gradient(nets.actor, nets.critic, batch.states);
    stats.actor_objective = ag.objective;
    if (!std::isfinite(ag.objective)) throw NumericError("actor objective is not finite");
    scale_in_place(ag.grads, -1.0);  // ascend J
    nn::adam_update(nets.actor, ag.grads, nets.actor_opt, hp.actor_lr);
    return stats;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_shape(online)) throw ShapeError("soft_update: target and online shapes differ");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        auto& t = target.layers[i];
        const auto& o = online.layers[i];
        t.weight = tau * o.weight + (1.0 - tau) * t.weight;
        t.bias = tau * o.bias + (1.0 - tau) * t.bias;
    }
}

DdpgAgent::DdpgAgent(HyperParams hp, ObservationScales scales, AgentSeeds seeds)
    : DdpgAgent(hp, scales, seeds, make_agent_nets(hp, seeds.init)) {}

DdpgAgent::DdpgAgent(HyperParams hp, ObservationScales scales, AgentSeeds seeds, AgentNets nets)
    : hp_(std::move(hp)),
      scales_(scales),
      seeds_(seeds),
      nets_(std::move(nets)),
      buffer_(hp_.buffer_capacity),
      noise_(hp_.noise_kind, hp_.noise_theta, hp_.noise_sigma, seeds.noise),
      sampling_rng_(seeds.sampling) {
    hp_.validate();
    if (nets_.actor.input_size() != kObsDim || nets_.actor.output_size() != kActDim ||
        nets_.critic.input_size() != kObsDim + kActDim || nets_.critic.output_size() != 1 ||
        !nets_.target_actor.same_shape(nets_.actor) || !nets_.target_critic.same_shape(nets_.critic))
        throw ShapeError("agent networks do not match the observation/action dimensions");
}

Policy DdpgAgent::greedy_policy() const {
    return [this](const Observation& obs, const Timestamp&) {
        return act(nets_, normalize_observation(obs, scales_), nullptr, obs.capacity).request;
    };
}

EpisodeStats run_episode(DdpgAgent& agent, BatteryEnv& env, EpisodeMode mode, std::size_t max_steps) {
    const bool train = mode == EpisodeMode::Train;
    const auto& hp = agent.hyperparams();
    const double capacity = env.config().capacity;

    EpisodeStats stats;
    ObsVec obs = normalize_observation(env.reset(), agent.scales());
    if (train) agent.noise().reset();

    while (!env.done() && stats.steps < max_steps) {
        const ActResult a = act(agent.nets(), obs, train ? &agent.noise() : nullptr, capacity);
        const StepResult sr = env.step(a.request);
        const ObsVec next = normalize_observation(sr.observation, agent.scales());
        stats.reward += sr.reward;
        ++stats.steps;

        if (train) {
            agent.buffer().push({obs, a.normalized, sr.reward, next, sr.done});
            ++stats.stored;
            if (agent.buffer().size() >= static_cast<std::size_t>(hp.batch_size)) {
                auto batch = agent.buffer().sample(static_cast<std::size_t>(hp.batch_size), agent.sampling_rng());
                const TrainStats ts = train_step(agent.nets(), *batch, hp);
                soft_update(agent.nets().target_critic, agent.nets().critic, hp.tau);
                soft_update(agent.nets().target_actor, agent.nets().actor, hp.tau);
                stats.mean_critic_loss += ts.critic_loss;
                stats.mean_actor_objective += ts.actor_objective;
                ++stats.updates;
            }
        }
        obs = next;
    }
    if (stats.updates > 0) {
        stats.mean_critic_loss /= static_cast<double>(stats.updates);
        stats.mean_actor_objective /= static_cast<double>(stats.updates);
    }
    return stats;
}

}  // namespace solar_ddpg

#include "solar_ddpg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/oracle.hpp"
#include "solar_ddpg/seeding.hpp"
#include "solar_ddpg/text_util.hpp"

namespace solar_ddpg {

using nlohmann::json;
namespace fs = std::filesystem;

DataSplit load_split(const DataConfig& data) {
    std::vector<WeekTrace> weeks;
    if (data.source == DataSource::Synthetic) {
        weeks = generate_synthetic_weeks(data.synthetic_weeks, data.profile, data.synthetic_seed);
    } else {
        std::ifstream in(data.path);
        if (!in) throw NotFoundError("data file not found: " + data.path);
        const auto households = parse_ausgrid_csv(in);
        const auto records = select_household(households, data.customer);
        weeks = filter_complete_weeks(records, data.year);
    }
    return split_train_test(weeks, data.n_train, data.split_seed);
}

TrialSeeds TrialSeeds::from_root(std::uint64_t root) {
    TrialSeeds s;
    s.root = root;
    s.agent = {derive_seed(root, 0), derive_seed(root, 1), derive_seed(root, 2)};
    s.week_sampling = derive_seed(root, 3);
    return s;
}

std::uint64_t trial_root_seed(std::uint64_t root, std::size_t index) { return derive_seed(root, 1000 + index); }

std::string trial_status_name(TrialStatus s) { return s == TrialStatus::Completed ? "completed" : "diverged"; }

std::string format_layers(const std::vector<int>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) out += (i ? "-" : "") + std::to_string(layers[i]);
    return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

json seeds_json(const TrialSeeds& s) {
    return {{"root", s.root},
            {"init", s.agent.init},
            {"noise", s.agent.noise},
            {"sampling", s.agent.sampling},
            {"week_sampling", s.week_sampling}};
}

TrialSeeds seeds_from_json(const json& j) {
    TrialSeeds s;
    s.root = j.at("root").get<std::uint64_t>();
    s.agent.init = j.at("init").get<std::uint64_t>();
    s.agent.noise = j.at("noise").get<std::uint64_t>();
    s.agent.sampling = j.at("sampling").get<std::uint64_t>();
    s.week_sampling = j.at("week_sampling").get<std::uint64_t>();
    return s;
}

void check_agent_shapes(const AgentNets& nets) {
    auto check = [](const Mlp& m, int in, int out, const char* name) {
        if (m.layers.empty() || m.input_size() != in || m.output_size() != out)
            throw ShapeError(std::string(name) + " expects " + std::to_string(in) + " inputs and " +
                             std::to_string(out) + " outputs");
    };
    check(nets.actor, kObsDim, kActDim, "actor");
    check(nets.critic, kObsDim + kActDim, 1, "critic");
    check(nets.target_actor, kObsDim, kActDim, "target actor");
    check(nets.target_critic, kObsDim + kActDim, 1, "target critic");
}

}  // namespace

TensorArchive to_archive(const AgentCheckpoint& ckpt) {
    TensorArchive a;
    a.put_network("actor", ckpt.nets.actor);
    a.put_network("critic", ckpt.nets.critic);
    a.put_network("target_actor", ckpt.nets.target_actor);
    a.put_network("target_critic", ckpt.nets.target_critic);
    a.put_adam("actor_opt", ckpt.nets.actor_opt);
    a.put_adam("critic_opt", ckpt.nets.critic_opt);
    RunConfig rc;
    rc.agent = ckpt.hp;
    rc.env = ckpt.env;
    const json doc = run_config_to_json(rc);
    a.meta()["agent"] = doc["agent"];
    a.meta()["env"] = doc["env"];
    a.meta()["observation_scales"] = ckpt.scales.scale;
    a.meta()["seeds"] = seeds_json(ckpt.seeds);
    a.meta()["iterations"] = ckpt.iterations;
    return a;
}

AgentCheckpoint from_archive(const TensorArchive& archive) {
    AgentCheckpoint c;
    const json& m = archive.meta();
    try {
        const RunConfig rc = run_config_from_json(json{{"agent", m.at("agent")}, {"env", m.at("env")}});
        c.hp = rc.agent;
        c.env = rc.env;
        c.scales.scale = m.at("observation_scales").get<std::array<double, kObsDim>>();
        c.seeds = seeds_from_json(m.at("seeds"));
        c.iterations = m.at("iterations").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    c.nets.actor = archive.network("actor");
    c.nets.critic = archive.network("critic");
    c.nets.target_actor = archive.network("target_actor");
    c.nets.target_critic = archive.network("target_critic");
    c.nets.actor_opt = archive.adam("actor_opt");
    c.nets.critic_opt = archive.adam("critic_opt");
    check_agent_shapes(c.nets);
    return c;
}

void save_checkpoint(const AgentCheckpoint& ckpt, const fs::path& path) { to_archive(ckpt).save(path); }

AgentCheckpoint load_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw NotFoundError("checkpoint not found: " + path.string());
    return from_archive(TensorArchive::load(path));
}

// ---------------------------------------------------------------- training log

void write_training_log(std::ostream& out, std::span<const CurvePoint> curve) {
    out << "iteration,validation_reward,mean_train_reward,mean_critic_loss,mean_actor_objective,noise_sigma\n";
    for (const auto& p : curve)
        out << p.iteration << ',' << text::format_double(p.validation_reward) << ','
            << text::format_double(p.mean_train_reward) << ',' << text::format_double(p.mean_critic_loss) << ','
            << text::format_double(p.mean_actor_objective) << ',' << text::format_double(p.noise_sigma) << '\n';
}

std::vector<CurvePoint> read_training_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "iteration,validation_reward,mean_train_reward,mean_critic_loss,mean_actor_objective,noise_sigma")
        throw FormatError("training log: unexpected header");
    std::vector<CurvePoint> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        auto cols = text::split(text::trim(line));
        if (cols.size() != 6) throw FormatError("training log line " + std::to_string(line_no) + ": expected 6 columns");
        auto it = text::parse_int(cols[0]);
        std::array<std::optional<double>, 5> v;
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = text::parse_double(cols[k + 1]);
        if (!it || std::any_of(v.begin(), v.end(), [](const auto& x) { return !x; }))
            throw FormatError("training log line " + std::to_string(line_no) + ": bad number");
        out.push_back({*it, *v[0], *v[1], *v[2], *v[3], *v[4]});
    }
    return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

Policy checkpoint_policy(const AgentCheckpoint& ckpt) {
    return [&ckpt](const Observation& obs, const Timestamp&) {
        return act(ckpt.nets, normalize_observation(obs, ckpt.scales), nullptr, obs.capacity).request;
    };
}

std::vector<std::vector<HalfHourRecord>> episodes_of(std::span<const WeekTrace> weeks, bool paper_mode) {
    std::vector<std::vector<HalfHourRecord>> out;
    if (paper_mode) {
        if (!weeks.empty()) out.push_back(concat_weeks(weeks));
        return out;
    }
    for (const auto& w : weeks) out.emplace_back(w.records().begin(), w.records().end());
    return out;
}

}  // namespace

EvaluationResult evaluate(const AgentCheckpoint& ckpt, std::span<const WeekTrace> weeks, bool paper_mode) {
    check_agent_shapes(ckpt.nets);
    if (weeks.empty()) throw ConfigError("evaluation needs at least one week");
    EvaluationResult r;
    const Policy policy = checkpoint_policy(ckpt);
    for (auto& episode : episodes_of(weeks, paper_mode)) {
        r.episode_starts.push_back(episode.front().time.day);
        auto ro = rollout(ckpt.env, episode, policy);
        r.episode_rewards.push_back(-ro.total_cost);
        r.steps.insert(r.steps.end(), ro.steps.begin(), ro.steps.end());
    }
    r.mean_reward = std::accumulate(r.episode_rewards.begin(), r.episode_rewards.end(), 0.0) /
                    static_cast<double>(r.episode_rewards.size());
    return r;
}

BaselineCosts baseline_costs(const EnvConfig& env, const OracleConfig& oracle, std::span<const WeekTrace> weeks,
                             bool paper_mode) {
    BaselineCosts c;
    const auto episodes = episodes_of(weeks, paper_mode);
    if (episodes.empty()) return c;
    for (const auto& e : episodes) {
        c.no_battery += no_battery_cost(e, env);
        c.greedy += rollout(env, e, make_greedy_policy(env)).total_cost;
        c.oracle += perfect_foresight_dp(e, env, oracle.soc_levels, oracle.action_levels).total_cost;
    }
    const double n = static_cast<double>(episodes.size());
    c.no_battery /= n;
    c.greedy /= n;
    c.oracle /= n;
    return c;
}

// ---------------------------------------------------------------- training

TrainingOutput run_training(const RunConfig& config, const DataSplit& split) {
    const auto t0 = std::chrono::steady_clock::now();
    const HyperParams& hp = config.agent;
    hp.validate();
    config.env.validate();
    if (split.train.empty() || split.test.empty()) throw ConfigError("data.n_train", "split needs training and test weeks");
    const bool paper = config.training.paper_mode;
    if (!paper && config.training.validation_week >= split.train.size())
        throw ConfigError("training.validation_week", "index beyond the " + std::to_string(split.train.size()) +
                                                          " training weeks");

    const TrialSeeds seeds = TrialSeeds::from_root(config.root_seed);
    const ObservationScales scales = compute_observation_scales(split.train, config.env.capacity);
    DdpgAgent agent(hp, scales, seeds.agent);
    std::mt19937_64 week_rng(seeds.week_sampling);
    std::uniform_int_distribution<std::size_t> pick_week(0, split.train.size() - 1);

    const std::vector<HalfHourRecord> whole_train = paper ? concat_weeks(split.train) : std::vector<HalfHourRecord>{};
    const auto validation = paper ? whole_train
                                  : std::vector<HalfHourRecord>(split.train[config.training.validation_week].records().begin(),
                                                                split.train[config.training.validation_week].records().end());

    TrialResult result;
    result.hyperparams = hp;
    result.seeds = seeds;

    const std::int64_t budget = hp.training_iterations;
    std::int64_t steps = 0;
    std::int64_t next_eval = config.training.eval_interval;
    double train_reward_sum = 0.0, loss_sum = 0.0, objective_sum = 0.0;
    std::size_t episodes_since = 0, updates_since = 0;

    auto current_sigma = [&] {
        const double frac = budget > 0 ? static_cast<double>(steps) / static_cast<double>(budget) : 1.0;
        return hp.noise_sigma + (hp.noise_sigma_final - hp.noise_sigma) * frac;
    };
    auto record_point = [&] {
        BatteryEnv venv(config.env, validation);
        CurvePoint p;
        p.iteration = steps;
        p.validation_reward = run_episode(agent, venv, EpisodeMode::Eval).reward;
        p.mean_train_reward = episodes_since ? train_reward_sum / static_cast<double>(episodes_since) : 0.0;
        p.mean_critic_loss = updates_since ? loss_sum / static_cast<double>(updates_since) : 0.0;
        p.mean_actor_objective = updates_since ? objective_sum / static_cast<double>(updates_since) : 0.0;
        p.noise_sigma = agent.noise().sigma();
        result.training_curve.push_back(p);
        train_reward_sum = loss_sum = objective_sum = 0.0;
        episodes_since = updates_since = 0;
    };

    try {
        while (steps < budget) {
            agent.noise().set_sigma(current_sigma());
            BatteryEnv env = paper ? BatteryEnv(config.env, whole_train) : BatteryEnv(config.env, split.train[pick_week(week_rng)]);
            const auto stats = run_episode(agent, env, EpisodeMode::Train, static_cast<std::size_t>(budget - steps));
            steps += static_cast<std::int64_t>(stats.steps);
            train_reward_sum += stats.reward;
            ++episodes_since;
            loss_sum += stats.mean_critic_loss * static_cast<double>(stats.updates);
            objective_sum += stats.mean_actor_objective * static_cast<double>(stats.updates);
            updates_since += stats.updates;
            if (steps >= next_eval || steps >= budget) {
                record_point();
                while (next_eval <= steps) next_eval += config.training.eval_interval;
            }
        }
    } catch (const NumericError& e) {
        result.status = TrialStatus::Diverged;
        result.message = e.what();
    }

    AgentCheckpoint ckpt{hp, scales, seeds, config.env, agent.nets(), steps};
    if (result.status == TrialStatus::Diverged && !(ckpt.nets.actor.all_finite() && ckpt.nets.critic.all_finite())) {
        result.mean_episode_reward = -std::numeric_limits<double>::max();
    } else {
        const auto eval = evaluate(ckpt, split.test, paper);
        result.mean_episode_reward = eval.mean_reward;
        result.episode_rewards = eval.episode_rewards;
    }
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(ckpt), std::move(result)};
}

// ---------------------------------------------------------------- parallel helper

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
// rethrown after all workers finish, lowest index first.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t k = std::max<std::size_t>(1, std::min(threads, n));
    if (k == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < k; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_file(const fs::path& path, const auto& writer) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    writer(out);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

// ---------------------------------------------------------------- sweep

SweepResult battery_size_sweep(const RunConfig& base, const DataSplit& split, std::span<const double> sizes,
                               const std::optional<fs::path>& out_dir) {
    if (sizes.empty()) throw ConfigError("sweep.sizes", "no capacities given");
    for (std::size_t i = 0; i < sizes.size(); ++i)
        if (!(sizes[i] > 0.0) || (i > 0 && !(sizes[i] > sizes[i - 1])))
            throw ConfigError("sweep.sizes", "capacities must be positive and strictly increasing");

    SweepResult sweep;
    sweep.entries.resize(sizes.size());
    sweep.trials.resize(sizes.size());
    parallel_for(sizes.size(), base.search.threads, [&](std::size_t i) {
        RunConfig cfg = base;
        cfg.env.capacity = sizes[i];
        cfg.root_seed = trial_root_seed(base.root_seed, i);
        auto out = run_training(cfg, split);
        const auto ref = baseline_costs(cfg.env, cfg.oracle, split.test, cfg.training.paper_mode);
        SweepEntry& e = sweep.entries[i];
        e.capacity = sizes[i];
        e.test_reward = out.result.mean_episode_reward;
        e.oracle_cost = ref.oracle;
        e.greedy_cost = ref.greedy;
        e.no_battery_cost = ref.no_battery;
        e.seeds = out.result.seeds;
        e.status = out.result.status;
        if (out_dir) {
            const fs::path dir = *out_dir / ("size_" + text::format_double(sizes[i]));
            write_file(dir / "training_log.csv", [&](std::ostream& o) { write_training_log(o, out.result.training_curve); });
            save_checkpoint(out.checkpoint, dir / "checkpoint.sddpg");
            const auto eval = evaluate(out.checkpoint, split.test, cfg.training.paper_mode);
            write_file(dir / "eval_steps.csv", [&](std::ostream& o) { write_step_table(o, eval.steps); });
        }
        sweep.trials[i] = std::move(out.result);
    });
    return sweep;
}

void write_sweep_table(std::ostream& out, const SweepResult& sweep) {
    out << "capacity,test_reward,oracle_cost,greedy_cost,no_battery_cost,status,seed\n";
    for (const auto& e : sweep.entries)
        out << text::format_double(e.capacity) << ',' << text::format_double(e.test_reward) << ','
            << text::format_double(e.oracle_cost) << ',' << text::format_double(e.greedy_cost) << ','
            << text::format_double(e.no_battery_cost) << ',' << trial_status_name(e.status) << ',' << e.seeds.root << '\n';
}

// ---------------------------------------------------------------- search

std::vector<HyperParams> sample_hyperparams(const SearchSpace& space, std::size_t draws, const HyperParams& base,
                                            std::mt19937_64& rng) {
    if (space.actor_hiddens.empty()) throw ConfigError("search.actor_hiddens", "search axis is empty");
    if (space.critic_hiddens.empty()) throw ConfigError("search.critic_hiddens", "search axis is empty");
    if (draws == 0) throw ConfigError("search.trials", "need at least one draw per grid cell");
    if (!(space.lr_min > 0.0) || !(space.lr_max >= space.lr_min))
        throw ConfigError("search.lr_min", "learning-rate range must satisfy 0 < lr_min <= lr_max");

    std::uniform_real_distribution<double> linear(space.lr_min, space.lr_max);
    std::uniform_real_distribution<double> logu(std::log(space.lr_min), std::log(space.lr_max));
    std::vector<HyperParams> out;
    for (const auto& a : space.actor_hiddens) {
        for (const auto& c : space.critic_hiddens) {
            for (std::size_t d = 0; d < draws; ++d) {
                HyperParams hp = base;
                hp.actor_hiddens = a;
                hp.critic_hiddens = c;
                double lr = space.log_uniform ? std::exp(logu(rng)) : linear(rng);
                lr = std::clamp(lr, space.lr_min, space.lr_max);
                hp.actor_lr = hp.critic_lr = lr;
                out.push_back(std::move(hp));
            }
        }
    }
    return out;
}

std::vector<SearchTrial> hyperparameter_search(const RunConfig& base, const DataSplit& split, std::size_t budget,
                                               const std::optional<fs::path>& out_dir) {
    if (budget == 0) throw ConfigError("search.trials", "budget must be at least 1");
    const std::size_t cells = base.search.actor_hiddens.size() * base.search.critic_hiddens.size();
    if (cells == 0) throw ConfigError("search", "search axis is empty");
    const std::size_t draws = (budget + cells - 1) / cells;
    std::mt19937_64 rng(derive_seed(base.root_seed, 999));
    auto candidates = sample_hyperparams(base.search, draws, base.agent, rng);
    // Interleave so a truncated budget still covers the grid: draw d of every cell first.
    std::vector<HyperParams> ordered;
    for (std::size_t d = 0; d < draws; ++d)
        for (std::size_t c = 0; c < cells; ++c) ordered.push_back(candidates[c * draws + d]);
    ordered.resize(budget);

    std::vector<SearchTrial> trials(budget);
    parallel_for(budget, base.search.threads, [&](std::size_t i) {
        RunConfig cfg = base;
        cfg.agent = ordered[i];
        cfg.root_seed = trial_root_seed(base.root_seed, i);
        auto out = run_training(cfg, split);
        if (out_dir) {
            char name[32];
            std::snprintf(name, sizeof(name), "trial_%03zu", i);
            const fs::path dir = *out_dir / "trials" / name;
            write_file(dir / "training_log.csv", [&](std::ostream& o) { write_training_log(o, out.result.training_curve); });
            save_checkpoint(out.checkpoint, dir / "checkpoint.sddpg");
        }
        trials[i] = {i, std::move(out.result)};
    });

    std::stable_sort(trials.begin(), trials.end(), [](const SearchTrial& a, const SearchTrial& b) {
        const bool ca = a.result.status == TrialStatus::Completed;
        const bool cb = b.result.status == TrialStatus::Completed;
        if (ca != cb) return ca;
        return a.result.mean_episode_reward > b.result.mean_episode_reward;
    });

    if (out_dir) {
        // Keep only the best trial's weights; a full grid of checkpoints is large.
        for (std::size_t r = 0; r < trials.size(); ++r) {
            char name[32];
            std::snprintf(name, sizeof(name), "trial_%03zu", trials[r].index);
            const fs::path ck = *out_dir / "trials" / name / "checkpoint.sddpg";
            if (r == 0) fs::rename(ck, *out_dir / "best_checkpoint.sddpg");
            else fs::remove(ck);
        }
        write_file(*out_dir / "ranked_trials.csv", [&](std::ostream& o) { write_ranked_table(o, trials); });
    }
    if (trials.front().result.status == TrialStatus::Diverged)
        throw NumericError("all " + std::to_string(trials.size()) + " trials diverged; first: " + trials.front().result.message);
    return trials;
}

void write_ranked_table(std::ostream& out, std::span<const SearchTrial> ranked) {
    out << "rank,trial,lr,actor_hiddens,critic_hiddens,mean_episode_reward,status,seed\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& t = ranked[r];
        out << r + 1 << ',' << t.index << ',' << text::format_double(t.result.hyperparams.actor_lr) << ','
            << format_layers(t.result.hyperparams.actor_hiddens) << ','
            << format_layers(t.result.hyperparams.critic_hiddens) << ','
            << text::format_double(t.result.mean_episode_reward) << ',' << trial_status_name(t.result.status) << ','
            << t.result.seeds.root << '\n';
    }
}

double reward_spread(std::span<const SearchTrial> ranked) {
    double best = -std::numeric_limits<double>::infinity(), worst = std::numeric_limits<double>::infinity();
    for (const auto& t : ranked) {
        if (t.result.status != TrialStatus::Completed) continue;
        best = std::max(best, t.result.mean_episode_reward);
        worst = std::min(worst, t.result.mean_episode_reward);
    }
    if (!std::isfinite(best) || worst == 0.0) return 0.0;
    return (best - worst) / std::abs(worst);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("spearman needs two equal-length series of length >= 2");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace solar_ddpg

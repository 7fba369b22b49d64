#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/experiment.hpp"
#include "solar_ddpg/oracle.hpp"
#include "solar_ddpg/plots.hpp"

using namespace solar_ddpg;
namespace fs = std::filesystem;

namespace {

RunConfig small_config(std::int64_t iterations) {
    RunConfig c;
    c.agent.actor_hiddens = {16, 16};
    c.agent.critic_hiddens = {16, 16};
    c.agent.batch_size = 16;
    c.agent.training_iterations = iterations;
    c.training.eval_interval = 336;
    c.data.synthetic_weeks = 5;
    c.data.n_train = 3;
    return c;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("solar_ddpg_exp_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("load_split") {
    RunConfig c;
    auto split = load_split(c.data);
    CHECK(split.train.size() == 8);
    CHECK(split.test.size() == 7);
    std::set<std::chrono::sys_days> starts;
    for (const auto& w : split.train) starts.insert(w.start_date());
    for (const auto& w : split.test) CHECK(starts.insert(w.start_date()).second);

    c.data.source = DataSource::Ausgrid;
    c.data.path = "/nonexistent/file.csv";
    CHECK_THROWS_AS(load_split(c.data), NotFoundError);

    c.data.path = std::string(SOLAR_DDPG_FIXTURES) + "/ausgrid_fixture.csv";
    auto real = load_split(c.data);
    CHECK(real.train.size() == 8);
    CHECK(real.test.size() == 7);
}

TEST_CASE("seed derivation") {
    auto a = TrialSeeds::from_root(5);
    CHECK(a == TrialSeeds::from_root(5));
    CHECK(!(a == TrialSeeds::from_root(6)));
    std::set<std::uint64_t> all{a.agent.init, a.agent.noise, a.agent.sampling, a.week_sampling};
    CHECK(all.size() == 4);
    CHECK(trial_root_seed(1, 0) != trial_root_seed(1, 1));
}

TEST_CASE("checkpoint round trip") {
    auto cfg = small_config(200);
    auto split = load_split(cfg.data);
    auto out = run_training(cfg, split);
    std::stringstream buf;
    to_archive(out.checkpoint).write(buf);
    auto back = from_archive(TensorArchive::read(buf));
    CHECK(back.hp == out.checkpoint.hp);
    CHECK(back.scales == out.checkpoint.scales);
    CHECK(back.seeds == out.checkpoint.seeds);
    CHECK(back.iterations == 200);
    CHECK(back.nets.actor == out.checkpoint.nets.actor);
    CHECK(back.nets.critic == out.checkpoint.nets.critic);
    CHECK(back.nets.target_actor == out.checkpoint.nets.target_actor);
    CHECK(back.nets.critic_opt.step == out.checkpoint.nets.critic_opt.step);
    CHECK(back.env.capacity == out.checkpoint.env.capacity);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.sddpg"), NotFoundError);
}

TEST_CASE("run_training") {
    auto split = load_split(small_config(0).data);

    SUBCASE("zero iterations keeps the initialization") {
        auto cfg = small_config(0);
        auto out = run_training(cfg, split);
        auto init = make_agent_nets(cfg.agent, TrialSeeds::from_root(cfg.root_seed).agent.init);
        CHECK(out.checkpoint.nets.actor == init.actor);
        CHECK(out.checkpoint.nets.critic == init.critic);
        CHECK(out.result.training_curve.empty());
        CHECK(out.result.status == TrialStatus::Completed);
    }

    SUBCASE("repeatable and consistent with evaluate") {
        auto cfg = small_config(800);
        auto a = run_training(cfg, split);
        auto b = run_training(cfg, split);
        CHECK(a.result.training_curve == b.result.training_curve);
        CHECK(a.result.mean_episode_reward == b.result.mean_episode_reward);
        CHECK(a.checkpoint.nets.actor == b.checkpoint.nets.actor);
        CHECK(a.checkpoint.nets.critic_opt.second_moment == b.checkpoint.nets.critic_opt.second_moment);

        REQUIRE(a.result.training_curve.size() == 3);
        CHECK(a.result.training_curve[0].iteration == 336);
        CHECK(a.result.training_curve.back().iteration == 800);
        CHECK(a.result.training_curve[0].noise_sigma == doctest::Approx(0.2));
        CHECK(a.result.training_curve.back().noise_sigma < 0.2);

        CHECK(a.result.mean_episode_reward <= 0.0);
        auto ev = evaluate(a.checkpoint, split.test);
        CHECK(std::abs(ev.mean_reward - a.result.mean_episode_reward) < 1e-9);
        CHECK(ev.episode_rewards.size() == split.test.size());
        CHECK(ev.steps.size() == split.test.size() * 336);

        auto other = cfg;
        other.root_seed = 2;
        CHECK(!(run_training(other, split).checkpoint.nets.actor == a.checkpoint.nets.actor));
    }

    SUBCASE("paper mode uses whole-split episodes") {
        auto cfg = small_config(400);
        cfg.training.paper_mode = true;
        auto out = run_training(cfg, split);
        CHECK(out.result.episode_rewards.size() == 1);
        auto ev = evaluate(out.checkpoint, split.test, true);
        CHECK(ev.steps.size() == split.test.size() * 336);
        CHECK(std::abs(ev.mean_reward - out.result.mean_episode_reward) < 1e-9);
    }

    SUBCASE("non-finite loss marks the trial diverged and keeps the partial log") {
        auto cfg = small_config(1500);
        cfg.data.profile.base_demand = 1e200;
        auto huge = load_split(cfg.data);
        auto out = run_training(cfg, huge);
        CHECK(out.result.status == TrialStatus::Diverged);
        CHECK(!out.result.message.empty());
        CHECK(out.result.mean_episode_reward <= 0.0);
        CHECK(out.checkpoint.nets.actor.all_finite());
    }

    SUBCASE("bad validation week") {
        auto cfg = small_config(10);
        cfg.training.validation_week = 3;
        CHECK_THROWS_AS(run_training(cfg, split), ConfigError);
    }
}

TEST_CASE("evaluate") {
    auto cfg = small_config(0);
    auto split = load_split(cfg.data);
    auto ckpt = run_training(cfg, split).checkpoint;

    // With nothing to serve, the only possible cost is grid charging in the
    // controlled window, which an untrained actor does request.
    auto zero = generate_synthetic_weeks(2, SyntheticProfile{0, 0, 0, 0, 0}, 3);
    auto z = evaluate(ckpt, zero);
    double bought = 0.0;
    for (const auto& s : z.steps) bought += s.settlement.grid_to_battery;
    CHECK(z.mean_reward == doctest::Approx(-cfg.env.tariff_cl * bought / 2.0).epsilon(1e-12));
    auto idle = ckpt;
    auto& out_layer = idle.nets.actor.layers.back();
    out_layer.weight.setZero();
    out_layer.bias.setConstant(-60.0);
    CHECK(std::abs(evaluate(idle, zero).mean_reward) < 1e-20);

    auto a = evaluate(ckpt, split.test);
    auto b = evaluate(ckpt, split.test);
    CHECK(a.episode_rewards == b.episode_rewards);

    auto bad = ckpt;
    bad.nets.actor = nn::init_mlp<double>({6, 4, 3}, nn::Activation::Sigmoid, 1);
    CHECK_THROWS_AS(evaluate(bad, split.test), ShapeError);
    CHECK_THROWS_AS(evaluate(ckpt, {}), ConfigError);
}

TEST_CASE("training log round trip") {
    std::vector<CurvePoint> curve{{336, -10.5, -11.25, 0.001, -3.5, 0.2}, {672, -10.125, -10.75, 1e-5, -3.25, 0.1}};
    std::stringstream s;
    write_training_log(s, curve);
    CHECK(read_training_log(s) == curve);
    std::stringstream bad("iter,reward\n");
    CHECK_THROWS_AS(read_training_log(bad), FormatError);
}

TEST_CASE("sample_hyperparams") {
    SearchSpace paper;
    HyperParams base;
    std::mt19937_64 rng(4);
    auto trials = sample_hyperparams(paper, 6, base, rng);
    CHECK(trials.size() == 72);
    for (const auto& hp : trials) {
        CHECK(hp.actor_lr >= 1e-7);
        CHECK(hp.actor_lr <= 1e-1);
        CHECK(hp.actor_lr == hp.critic_lr);
        CHECK(hp.gamma == base.gamma);
    }
    CHECK(trials[0].actor_hiddens == std::vector<int>{200, 200});
    CHECK(trials[0].critic_hiddens == std::vector<int>{200, 200});
    CHECK(trials[71].actor_hiddens == std::vector<int>{400, 400});
    CHECK(trials[71].critic_hiddens == std::vector<int>{500, 500});

    std::mt19937_64 r1(9), r2(9);
    auto x = sample_hyperparams(paper, 2, base, r1);
    auto y = sample_hyperparams(paper, 2, base, r2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].actor_lr == y[i].actor_lr);

    SearchSpace logspace = paper;
    logspace.log_uniform = true;
    std::mt19937_64 r3(1);
    int below = 0;
    for (const auto& hp : sample_hyperparams(logspace, 10, base, r3)) {
        CHECK(hp.actor_lr >= 1e-7);
        CHECK(hp.actor_lr <= 1e-1);
        below += hp.actor_lr < 1e-4;
    }
    CHECK(below > 0);

    SearchSpace empty = paper;
    empty.critic_hiddens.clear();
    CHECK_THROWS_AS(sample_hyperparams(empty, 1, base, rng), ConfigError);
}

TEST_CASE("hyperparameter_search ranking") {
    auto cfg = small_config(120);
    cfg.search.actor_hiddens = {{8}, {16}};
    cfg.search.critic_hiddens = {{8}, {16}};
    cfg.search.lr_min = 1e-4;
    cfg.search.lr_max = 1e-2;
    auto split = load_split(cfg.data);
    auto dir = scratch("search");
    auto ranked = hyperparameter_search(cfg, split, 6, dir);
    REQUIRE(ranked.size() == 6);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        seen.insert(ranked[i].index);
        if (i > 0) CHECK(ranked[i - 1].result.mean_episode_reward >= ranked[i].result.mean_episode_reward);
    }
    CHECK(seen.size() == 6);
    CHECK(fs::exists(dir / "ranked_trials.csv"));
    CHECK(fs::exists(dir / "best_checkpoint.sddpg"));
    CHECK(fs::exists(dir / "trials" / "trial_005" / "training_log.csv"));

    // The best checkpoint re-evaluates to the reported reward.
    auto best = load_checkpoint(dir / "best_checkpoint.sddpg");
    CHECK(std::abs(evaluate(best, split.test).mean_reward - ranked[0].result.mean_episode_reward) < 1e-9);

    cfg.search.threads = 3;
    auto parallel = hyperparameter_search(cfg, split, 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(parallel[i].index == ranked[i].index);
        CHECK(parallel[i].result.mean_episode_reward == ranked[i].result.mean_episode_reward);
    }
    CHECK_THROWS_AS(hyperparameter_search(cfg, split, 0), ConfigError);
}

TEST_CASE("reward_spread and spearman") {
    std::vector<SearchTrial> t(3);
    t[0].result.mean_episode_reward = -10;
    t[1].result.mean_episode_reward = -12;
    t[2].result.mean_episode_reward = -1e9;
    t[2].result.status = TrialStatus::Diverged;
    CHECK(reward_spread(t) == doctest::Approx(2.0 / 12.0));

    std::vector<double> x{1, 2, 3, 4}, up{10, 20, 25, 40}, down{4, 3, 2, 1}, tied{1, 1, 2, 2};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    CHECK(spearman(x, tied) == doctest::Approx(0.894427191));
    CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("battery_size_sweep and plot export") {
    auto cfg = small_config(336);
    auto split = load_split(cfg.data);
    auto dir = scratch("sweep");
    std::vector<double> sizes{0.5, 1.0, 1.5};
    auto sweep = battery_size_sweep(cfg, split, sizes, dir);
    REQUIRE(sweep.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(sweep.entries[i].capacity == sizes[i]);
        CHECK(sweep.entries[i].no_battery_cost == sweep.entries[0].no_battery_cost);
        if (i > 0) CHECK(sweep.entries[i].oracle_cost <= sweep.entries[i - 1].oracle_cost);
        CHECK(sweep.entries[i].oracle_cost <= sweep.entries[i].greedy_cost + 1e-9);
    }
    {
        std::ofstream f(dir / "sweep.csv");
        write_sweep_table(f, sweep);
    }

    std::vector<double> unsorted{1.0, 0.5};
    CHECK_THROWS_AS(battery_size_sweep(cfg, split, unsorted), ConfigError);

    auto ex = export_plots(dir, dir / "plots");
    REQUIRE(ex.missing.empty());
    CHECK(ex.written.size() == 3);

    auto count_lines = [](const fs::path& p) {
        std::ifstream in(p);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) ++n;
        return n;
    };
    CHECK(count_lines(dir / "plots" / "fig4_test_reward.csv") == 1 + 3);
    CHECK(count_lines(dir / "plots" / "fig5_daily_profile.csv") == 1 + 4 * 48);
    CHECK(count_lines(dir / "plots" / "fig3_training_curves.csv") == 1 + 3);

    // Recompute the 1 kWh profile from the raw settlement log.
    std::ifstream steps_in(dir / "size_1" / "eval_steps.csv");
    auto steps = read_step_table(steps_in);
    std::ifstream prof(dir / "plots" / "fig5_daily_profile.csv");
    std::string line;
    std::getline(prof, line);
    int checked = 0;
    while (std::getline(prof, line)) {
        std::stringstream ss(line);
        std::string series, slot_s, time_s, mean_s, std_s;
        std::getline(ss, series, ',');
        std::getline(ss, slot_s, ',');
        std::getline(ss, time_s, ',');
        std::getline(ss, mean_s, ',');
        std::getline(ss, std_s, ',');
        const int slot = std::stoi(slot_s);
        std::vector<double> v;
        for (const auto& s : steps) {
            if (s.record.time.slot != slot) continue;
            if (series == "gc") v.push_back(s.record.gc);
            else if (series == "charge") v.push_back(s.charge);
            else if (series == "discharge") v.push_back(s.settlement.discharge_to_gc + s.settlement.discharge_to_cl);
            else v.push_back(s.record.cs);
        }
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        CHECK(std::abs(std::stod(mean_s) - m) < 1e-9);
        CHECK(std::abs(std::stod(std_s) - std::sqrt(var / static_cast<double>(v.size()))) < 1e-9);
        ++checked;
    }
    CHECK(checked == 192);

    fs::remove(dir / "size_1.5" / "training_log.csv");
    auto missing = export_plots(dir, dir / "plots2");
    REQUIRE(missing.missing.size() == 1);
    CHECK(missing.missing[0] == dir / "size_1.5" / "training_log.csv");
    CHECK(!fs::exists(dir / "plots2"));
}

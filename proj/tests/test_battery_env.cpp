#include <doctest.h>

#include <random>
#include <sstream>

#include "solar_ddpg/battery_env.hpp"
#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/oracle.hpp"

using namespace solar_ddpg;
using namespace std::chrono;

namespace {

HalfHourRecord rec(double gc, double cl, double cs, int slot = 24) {
    return {{sys_days{2013y / January / 7}, slot}, gc, cl, cs};
}

// Independent feasibility predicate for a clipped action.
bool feasible(const Action& a, const BatteryState& st, const HalfHourRecord& r, bool in_window) {
    const double eps = 1e-12;
    return a.charge_solar >= 0 && a.charge_grid >= 0 && a.discharge >= 0 && a.charge_solar <= r.cs + eps &&
           a.charge_solar + a.charge_grid <= st.capacity - st.charge + eps && (in_window || a.charge_grid == 0.0) &&
           a.discharge <= st.charge + a.charge_solar + a.charge_grid + eps;
}

}  // namespace

TEST_CASE("controlled window is [23:00, 08:00) on slot start times") {
    CHECK(is_controlled_window(46));   // 23:00
    CHECK_FALSE(is_controlled_window(24));  // 12:00
    CHECK_FALSE(is_controlled_window(16));  // 08:00
    for (int slot = 0; slot < 48; ++slot) {
        const int minutes = slot * 30;
        const bool expected = minutes >= 23 * 60 || minutes < 8 * 60;
        CHECK(is_controlled_window(slot) == expected);
    }
    CHECK_THROWS_AS(is_controlled_window(48), DomainError);
    CHECK_THROWS_AS(is_controlled_window(-1), DomainError);
    CHECK(is_controlled_window(10, 8, 20));
    CHECK_FALSE(is_controlled_window(20, 8, 20));
}

TEST_CASE("clip_action examples") {
    const BatteryState st{2.0, 0.0};
    CHECK(clip_action({1.0, 0, 0}, st, rec(0, 0, 0.3), false) == Action{0.3, 0, 0});
    CHECK(clip_action({0, 0.5, 0}, st, rec(0, 0, 0), false) == Action{0, 0, 0});
    CHECK(clip_action({0, 0, 5.0}, {2.0, 0.2}, rec(1, 0, 0), false) == Action{0, 0, 0.2});
}

TEST_CASE("clip_action agrees with a brute-force search for the priority-maximal feasible action") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const double cap = 0.2 + 2.0 * u(rng);
        const BatteryState st{cap, cap * u(rng)};
        const auto r = rec(u(rng), u(rng), u(rng));
        const bool in_window = trial % 2 == 0;
        const Action raw{2.5 * u(rng), 2.5 * u(rng), 2.5 * u(rng)};
        const Action c = clip_action(raw, st, r, in_window);
        REQUIRE(feasible(c, st, r, in_window));

        // Scan a grid below each raw component in priority order; nothing feasible may exceed the clip.
        const int n = 200;
        double best_s = 0.0;
        for (int i = 0; i <= n; ++i) {
            double s = raw.charge_solar * i / n;
            if (feasible({s, 0, 0}, st, r, in_window)) best_s = std::max(best_s, s);
        }
        CHECK(c.charge_solar >= best_s - 1e-12);
        double best_g = 0.0;
        for (int i = 0; i <= n; ++i) {
            double g = raw.charge_grid * i / n;
            if (feasible({c.charge_solar, g, 0}, st, r, in_window)) best_g = std::max(best_g, g);
        }
        CHECK(c.charge_grid >= best_g - 1e-12);
        double best_d = 0.0;
        for (int i = 0; i <= n; ++i) {
            double d = raw.discharge * i / n;
            if (feasible({c.charge_solar, c.charge_grid, d}, st, r, in_window)) best_d = std::max(best_d, d);
        }
        CHECK(c.discharge >= best_d - 1e-12);
    }
}

TEST_CASE("settle examples") {
    EnvConfig cfg;
    cfg.capacity = 2.0;
    SUBCASE("no battery use: 0.27*1.0 + 0.10*0.5") {
        auto [next, s] = settle({2.0, 0.0}, rec(1.0, 0.5, 0.0), {}, cfg, false);
        CHECK(s.cost == doctest::Approx(0.32).epsilon(1e-12));
        CHECK(next.charge == 0.0);
    }
    SUBCASE("zero step") {
        auto [next, s] = settle({2.0, 0.7}, rec(0, 0, 0), {}, cfg, false);
        CHECK(s.cost == 0.0);
        CHECK(next.charge == 0.7);
    }
    SUBCASE("solar charge then discharge to GC") {
        const BatteryState st{2.0, 0.0};
        const auto r = rec(1.0, 0.0, 1.5);
        const Action c = clip_action({1.5, 0, 1.0}, st, r, false);
        auto [next, s] = settle(st, r, c, cfg, false);
        CHECK(s.solar_to_battery == 1.5);
        CHECK(s.solar_to_load == 0.0);
        CHECK(s.discharge_to_gc == 1.0);
        CHECK(s.residual_gc == 0.0);
        CHECK(s.cost == 0.0);
        CHECK(next.charge == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("infeasible action is a contract violation") {
        CHECK_THROWS_AS(settle({2.0, 0.0}, rec(0, 0, 0.1), {0.5, 0, 0}, cfg, false), ContractViolation);
        CHECK_THROWS_AS(settle({2.0, 0.0}, rec(0, 0, 0), {0, 0.5, 0}, cfg, false), ContractViolation);
    }
    SUBCASE("solar surplus serves CL unless disabled") {
        auto [n1, s1] = settle({2.0, 0.0}, rec(0.2, 0.3, 1.0), {}, cfg, false);
        CHECK(s1.residual_cl == 0.0);
        CHECK(s1.spilled_solar == doctest::Approx(0.5));
        cfg.solar_serves_cl = false;
        auto [n2, s2] = settle({2.0, 0.0}, rec(0.2, 0.3, 1.0), {}, cfg, false);
        CHECK(s2.residual_cl == doctest::Approx(0.3));
        CHECK(s2.spilled_solar == doctest::Approx(0.8));
    }
}

TEST_CASE("per-step invariants on random inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        EnvConfig cfg;
        cfg.capacity = 0.1 + 3.0 * u(rng);
        const BatteryState st{cfg.capacity, cfg.capacity * u(rng)};
        const int slot = static_cast<int>(u(rng) * 48) % 48;
        const auto r = rec(2 * u(rng), u(rng), 2 * u(rng), slot);
        const bool in_window = is_controlled_window(slot);
        const Action raw{1e3 * u(rng) * u(rng), 1e3 * u(rng) * u(rng), 1e3 * u(rng) * u(rng)};
        const Action c = clip_action(raw, st, r, in_window);
        auto [next, s] = settle(st, r, c, cfg, in_window);

        CHECK(std::abs((next.charge - st.charge) -
                       (s.solar_to_battery + s.grid_to_battery - s.discharge_to_gc - s.discharge_to_cl)) < 1e-9);
        CHECK(next.charge >= 0.0);
        CHECK(next.charge <= cfg.capacity);
        if (!in_window) CHECK(s.grid_to_battery == 0.0);
        CHECK(std::abs(s.solar_to_battery + s.solar_to_load + s.spilled_solar - r.cs) < 1e-9);
        CHECK(std::abs(settlement_cost(s, cfg) - s.cost) < 1e-9);
        for (double v : {s.solar_to_battery, s.grid_to_battery, s.solar_to_load, s.discharge_to_gc, s.discharge_to_cl,
                         s.residual_gc, s.residual_cl, s.spilled_solar})
            CHECK(v >= 0.0);
    }
}

TEST_CASE("reset and step protocol") {
    auto week = generate_synthetic_weeks(1, SyntheticProfile{}, 1)[0];
    EnvConfig cfg;
    cfg.capacity = 1.0;
    BatteryEnv env(cfg, {week.records().begin(), week.records().end()});
    Observation o = env.reset();
    CHECK(o.capacity == 1.0);
    CHECK(o.charge == 0.0);
    CHECK(o.residual_cl == 0.0);
    CHECK(o.residual_gc == 0.0);
    CHECK(o.gc == week.records()[0].gc);

    std::size_t steps = 0;
    bool done = false;
    while (!done) {
        auto sr = env.step(null_action());
        ++steps;
        done = sr.done;
        CHECK(sr.reward == -sr.settlement.cost);
        if (!done) {
            CHECK(sr.observation.gc == week.records()[steps].gc);
            CHECK(sr.observation.residual_gc == sr.settlement.residual_gc);
            CHECK(sr.observation.residual_cl == sr.settlement.residual_cl);
        }
    }
    CHECK(steps == 336);
    CHECK_THROWS_AS(env.step(null_action()), ProtocolError);

    BatteryEnv empty(cfg, {});
    CHECK_THROWS_AS(empty.reset(), ConfigError);
}

TEST_CASE("step reward for the hand-settled cost") {
    EnvConfig cfg;
    cfg.capacity = 2.0;
    BatteryEnv env(cfg, {rec(1.0, 0.5, 0.0, 24)});
    env.reset();
    auto sr = env.step(null_action());
    CHECK(sr.reward == doctest::Approx(-0.32).epsilon(1e-12));
    CHECK(sr.done);
}

TEST_CASE("zero week with null actions costs nothing") {
    SyntheticProfile zero{0, 0, 0, 0, 0};
    auto week = generate_synthetic_weeks(1, zero, 1)[0];
    auto r = rollout(EnvConfig{}, week.records(), [](const Observation&, const Timestamp&) { return null_action(); });
    CHECK(r.total_cost == 0.0);
    CHECK(r.steps.size() == 336);
}

TEST_CASE("null-action residuals equal demand when there is no solar") {
    SyntheticProfile p;
    p.peak_solar = 0.0;
    auto week = generate_synthetic_weeks(1, p, 3)[0];
    auto r = rollout(EnvConfig{}, week.records(), [](const Observation&, const Timestamp&) { return null_action(); });
    for (const auto& s : r.steps) {
        CHECK(s.settlement.residual_gc == s.record.gc);
        CHECK(s.settlement.residual_cl == s.record.cl);
    }
}

TEST_CASE("rollout rejects bad policy output") {
    auto week = generate_synthetic_weeks(1, SyntheticProfile{}, 1)[0];
    auto bad = [](const Observation&, const Timestamp&) { return Action{-0.1, 0, 0}; };
    CHECK_THROWS_AS(rollout(EnvConfig{}, week.records(), bad), PolicyError);
    auto nan = [](const Observation&, const Timestamp&) { return Action{0, std::nan(""), 0}; };
    CHECK_THROWS_AS(rollout(EnvConfig{}, week.records(), nan), PolicyError);
}

TEST_CASE("solar-first dispatch cost is non-increasing in capacity") {
    auto weeks = generate_synthetic_weeks(3, SyntheticProfile{}, 5);
    auto policy = [](const Observation& o, const Timestamp&) { return Action{o.capacity, 0.0, o.gc}; };
    for (const auto& w : weeks) {
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 10; ++k) {
            EnvConfig cfg;
            cfg.capacity = 0.2 * k;
            double cost = rollout(cfg, w.records(), policy).total_cost;
            CHECK(cost <= prev + 1e-12);
            prev = cost;
        }
    }
}

TEST_CASE("step table round trip") {
    auto week = generate_synthetic_weeks(1, SyntheticProfile{}, 1)[0];
    EnvConfig cfg;
    auto r = rollout(cfg, week.records(), make_greedy_policy(cfg));
    std::stringstream buf;
    write_step_table(buf, r.steps);
    auto back = read_step_table(buf);
    REQUIRE(back.size() == r.steps.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].record == r.steps[i].record);
        CHECK(back[i].settlement.cost == r.steps[i].settlement.cost);
        CHECK(back[i].charge == r.steps[i].charge);
    }
}

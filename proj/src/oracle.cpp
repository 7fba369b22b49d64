#include "solar_ddpg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "solar_ddpg/errors.hpp"

namespace solar_ddpg {

double no_battery_cost(std::span<const HalfHourRecord> trace, const EnvConfig& config) {
    double cost = 0.0;
    for (const auto& r : trace) {
        const double surplus = std::max(0.0, r.cs - r.gc);
        const double cl = config.solar_serves_cl ? std::max(0.0, r.cl - surplus) : r.cl;
        cost += config.tariff_gc * std::max(0.0, r.gc - r.cs) + config.tariff_cl * cl;
    }
    return cost;
}

Action greedy_policy(const Observation& obs, bool in_window) {
    const double headroom = std::max(0.0, obs.capacity - obs.charge);
    Action a;
    a.charge_solar = headroom;
    const double leftover_solar = std::max(0.0, obs.cs - std::min(obs.cs, headroom));
    a.discharge = std::max(0.0, obs.gc - leftover_solar);
    a.charge_grid = (in_window && obs.cs == 0.0) ? headroom : 0.0;
    return a;
}

Policy make_greedy_policy(const EnvConfig& config) {
    return [config](const Observation& obs, const Timestamp& t) {
        return greedy_policy(obs, is_controlled_window(t.slot, config));
    };
}

Action action_from_levels(const std::array<int, 3>& levels, int action_levels, double capacity) {
    const double step = capacity / static_cast<double>(action_levels - 1);
    return {levels[0] * step, levels[1] * step, levels[2] * step};
}

namespace {

void check_levels(int soc_levels, int action_levels) {
    if (soc_levels < 2) throw ConfigError("need at least 2 SoC levels");
    if (action_levels < 2) throw ConfigError("need at least 2 action levels");
}

std::vector<std::array<int, 3>> action_grid(int action_levels) {
    std::vector<std::array<int, 3>> grid;
    for (int s = 0; s < action_levels; ++s)
        for (int g = 0; g < action_levels; ++g)
            for (int d = 0; d < action_levels; ++d) grid.push_back({s, g, d});
    return grid;
}

struct Lattice {
    double capacity;
    int levels;
    double charge(int i) const { return capacity * static_cast<double>(i) / static_cast<double>(levels - 1); }
    int nearest(double charge) const {
        const double x = charge / capacity * static_cast<double>(levels - 1);
        return std::clamp(static_cast<int>(std::lround(x)), 0, levels - 1);
    }
};

struct Outcome {
    double cost;
    double next_charge;
};

Outcome settle_request(const HalfHourRecord& rec, double charge, const Action& request, const EnvConfig& config) {
    const bool in_window = is_controlled_window(rec.time.slot, config);
    const BatteryState state{config.capacity, charge};
    const Action clipped = clip_action(request, state, rec, in_window);
    auto [next, s] = settle(state, rec, clipped, config, in_window);
    return {s.cost, next.charge};
}

}  // namespace

DiscretizedSchedule perfect_foresight_dp(std::span<const HalfHourRecord> trace, const EnvConfig& config, int soc_levels,
                                         int action_levels) {
    check_levels(soc_levels, action_levels);
    config.validate();

    DiscretizedSchedule sched;
    sched.soc_levels = soc_levels;
    sched.action_levels = action_levels;
    const std::size_t horizon = trace.size();
    if (horizon == 0) return sched;

    const Lattice lattice{config.capacity, soc_levels};
    const auto grid = action_grid(action_levels);
    std::vector<Action> requests;
    for (const auto& g : grid) requests.push_back(action_from_levels(g, action_levels, config.capacity));

    // value[t][i]: minimal snapped-model cost from step t at level i.
    std::vector<std::vector<double>> value(horizon + 1, std::vector<double>(static_cast<std::size_t>(soc_levels), 0.0));
    for (std::size_t t = horizon; t-- > 0;) {
        for (int i = 0; i < soc_levels; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& req : requests) {
                const Outcome o = settle_request(trace[t], lattice.charge(i), req, config);
                const double v = o.cost + value[t + 1][static_cast<std::size_t>(lattice.nearest(o.next_charge))];
                if (v < best) best = v;
            }
            value[t][static_cast<std::size_t>(i)] = best;
        }
    }
    sched.lattice_cost = value[0][0];

    // Continuous execution with one-step lookahead on the lattice values.
    double charge = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_k = 0;
        Outcome best_outcome{0.0, charge};
        for (std::size_t k = 0; k < requests.size(); ++k) {
            const Outcome o = settle_request(trace[t], charge, requests[k], config);
            const double v = o.cost + value[t + 1][static_cast<std::size_t>(lattice.nearest(o.next_charge))];
            if (v < best) {
                best = v;
                best_k = k;
                best_outcome = o;
            }
        }
        sched.actions.push_back(grid[best_k]);
        sched.total_cost += best_outcome.cost;
        charge = best_outcome.next_charge;
    }
    return sched;
}

RolloutResult rollout_schedule(std::span<const HalfHourRecord> trace, const EnvConfig& config,
                               const DiscretizedSchedule& schedule) {
    if (schedule.actions.size() != trace.size()) throw ShapeError("schedule length differs from the trace");
    std::size_t t = 0;
    return rollout(config, trace, [&](const Observation&, const Timestamp&) {
        return action_from_levels(schedule.actions[t++], schedule.action_levels, config.capacity);
    });
}

double enumerate_exhaustive(std::span<const HalfHourRecord> trace, const EnvConfig& config, int soc_levels,
                            int action_levels, ExhaustiveDynamics dynamics, double max_sequences) {
    check_levels(soc_levels, action_levels);
    config.validate();
    const double sequences = std::pow(static_cast<double>(action_levels), 3.0 * static_cast<double>(trace.size()));
    if (sequences > max_sequences)
        throw ResourceGuardError("exhaustive search over " + std::to_string(sequences) + " sequences exceeds the limit");
    if (trace.empty()) return 0.0;

    const Lattice lattice{config.capacity, soc_levels};
    std::vector<Action> requests;
    for (const auto& g : action_grid(action_levels)) requests.push_back(action_from_levels(g, action_levels, config.capacity));

    double best = std::numeric_limits<double>::infinity();
    // Depth-first over every request sequence; no pruning.
    auto search = [&](auto&& self, std::size_t t, double charge, double cost_so_far) -> void {
        if (t == trace.size()) {
            best = std::min(best, cost_so_far);
            return;
        }
        for (const auto& req : requests) {
            const Outcome o = settle_request(trace[t], charge, req, config);
            const double next =
                dynamics == ExhaustiveDynamics::Lattice ? lattice.charge(lattice.nearest(o.next_charge)) : o.next_charge;
            self(self, t + 1, next, cost_so_far + o.cost);
        }
    };
    search(search, 0, 0.0, 0.0);
    return best;
}

}  // namespace solar_ddpg
